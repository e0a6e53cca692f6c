use rayon::prelude::*;
use sausage::regen::*;

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn main() {
    let p = RegenParams { level_spacing: 1.0, buffer: 1.0, slab_half_width: 2.0, eps_cut: 1e-10, nu: 1.0 };
    // (a) renewal rate at T=2000, dt=1e-3, 40 seeds
    for dt in [1e-3, 2.5e-4] {
        let rates: Vec<f64> = (0..40u64).into_par_iter().map(|seed| {
            let t_max = 2000.0;
            let margin = p.d_star() / p.nu + 10.0;
            let (times, u) = simulate_longitudinal(p.nu, t_max + margin, dt, 100 + seed);
            let tr = detect_regenerations(&u, &times, &p).unwrap();
            tr.n_at(t_max) as f64 / t_max
        }).collect();
        let (m, se) = mean_se(&rates);
        println!("rate dt={dt}: {m:.5} +- {se:.5}  target 0.86466  z={:.2}", (m - 0.8646647) / se);
    }
    // (b) E[tau_1] from fresh paths; (d) Theta+ first cut
    for dt in [1e-3, 2.5e-4] {
        let res: Vec<(f64, Option<f64>)> = (0..30_000u64).into_par_iter().map(|seed| {
            let (times, u) = simulate_longitudinal(p.nu, 40.0, dt, 7_000_000 + seed);
            let tr = detect_regenerations(&u, &times, &p).unwrap();
            let first = tr.cuts.first().map(|c| (c.time, c.theta_plus)).unwrap_or((f64::NAN, None));
            (first.0, first.1)
        }).collect();
        let tau1: Vec<f64> = res.iter().map(|r| r.0).filter(|v| v.is_finite()).collect();
        let th: Vec<f64> = res.iter().filter_map(|r| r.1).collect();
        let (m, se) = mean_se(&tau1);
        println!("E[tau1] dt={dt}: {m:.5} +- {se:.5}  target 1.15652  z={:.2}", (m - 1.1565176) / se);
        let (mt, set) = mean_se(&th);
        println!("E[Theta+(2)] first cut dt={dt}: {mt:.5} +- {set:.5}  (rho/nu = 2)  z={:.2}", (mt - 2.0) / set);
    }
    // (c,e) stationary cycles: Delta tau for k>=2, N-per-cycle distribution
    let mut all: Vec<(Vec<f64>, Vec<usize>)> = (0..64u64).into_par_iter().map(|seed| {
        let (times, u) = simulate_longitudinal(p.nu, 2000.0, 1e-3, 313 + seed);
        let tr = detect_regenerations(&u, &times, &p).unwrap();
        let lens = tr.cycle_lengths()[1..].to_vec();
        let ns: Vec<usize> = tr.cuts[1..].iter().map(|c| c.n_candidates).collect();
        (lens, ns)
    }).collect();
    let mut lens = Vec::new(); let mut ns = Vec::new();
    for (l, n) in all.drain(..) { lens.extend(l); ns.extend(n); }
    let (m, se) = mean_se(&lens);
    println!("E[dtau k>=2]: {m:.5} +- {se:.5}  target 1.15652  z={:.2}  (n={})", (m - 1.1565176) / se, lens.len());
    let total = ns.len() as f64;
    let pr = 1.0 - (-2.0f64).exp();
    for k in 1..=4 {
        let obs = ns.iter().filter(|&&n| n == k).count() as f64 / total;
        let exp = (1.0 - pr).powi(k as i32 - 1) * pr;
        println!("P(N={k}): obs {obs:.5} vs geo {exp:.5}  (se {:.5})", (obs * (1.0 - obs) / total).sqrt());
    }
}
