use shrink_core::estimators::adm_shp_fit;
use shrink_core::model::Dataset;
use shrink_core::posterior::{build_posterior, exact_theta_inference};
use shrink_core::rng::SplitMix64;

fn main() {
    let mut rng = SplitMix64::new(0x1004);
    let mut worst_median = 0.0f64;
    let mut conservative = 0usize; let mut over_n = 0usize;
    for _ in 0..200 {
        let k = 10 + (rng.next_u64() as usize) % 15;
        let v = 10f64.powf(2.0 * rng.next_f64() - 1.0);
        let a_true = v * 4f64.powf(2.0 * rng.next_f64() - 1.0); // log-uniform [0.25,4]
        let mu = 10.0 * rng.next_f64() - 5.0;
        let sd = (a_true + v).sqrt();
        let ys: Vec<f64> = (0..k).map(|_| mu + sd * rng.next_normal()).collect();
        let d = Dataset::intercept_only(
            ys.iter().enumerate().map(|(j, &y)| (format!("g{j}"), y, v)).collect()).unwrap();
        let adm = adm_shp_fit(&d, 1.0, 0.95).unwrap();
        let grid = build_posterior(&d, 512).unwrap();
        let mut rels: Vec<f64> = Vec::new();
        for j in 0..k {
            let ex = exact_theta_inference(&grid, &d, j, 0.95).unwrap();
            let half = 0.5 * (ex.hi - ex.lo);
            let g = &adm.per_group[j];
            let rel = ((g.lo - ex.lo).abs() / half).max((g.hi - ex.hi).abs() / half);
            rels.push(rel);
            if rel > 0.05 {
                over_n += 1;
                if (g.hi - g.lo) > (ex.hi - ex.lo) { conservative += 1; }
            }
        }
        rels.sort_by(|a,b| a.partial_cmp(b).unwrap());
        worst_median = worst_median.max(rels[rels.len()/2]);
    }
    println!("worst per-dataset median: {:.4}", worst_median);
    println!("over-5% groups: {over_n}, conservative among them: {conservative}");
}
