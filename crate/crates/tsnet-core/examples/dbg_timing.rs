use std::time::Instant;
use tsnet_core::datagen::{sample_instance, InstanceDistribution};
use tsnet_core::ga::{ga_solve, GaConfig};
use tsnet_core::model::SystemParams;
use tsnet_core::oracle::OracleConfig;

fn main() {
    let params = SystemParams::default();
    let dist = InstanceDistribution::default();
    let ocfg = OracleConfig::default();
    for (pop, gens) in [(32usize, 50usize), (100, 200)] {
        let ga = GaConfig { population_size: pop, generations: gens, ..GaConfig::default() };
        let t0 = Instant::now();
        let reps = 5;
        for s in 0..reps {
            let inst = sample_instance(&dist, 10, s, &params).unwrap();
            let _ = ga_solve(&inst, &params, &ga, &ocfg).unwrap();
        }
        println!("pop {pop} gens {gens}: {:.1} ms/instance", t0.elapsed().as_secs_f64() * 1e3 / reps as f64);
    }
    // Oracle timing at N=16
    let t0 = Instant::now();
    let inst = sample_instance(&dist, 16, 0, &params).unwrap();
    let u = tsnet_core::oracle::enumerate_optimal_utility(&inst, &params, &ocfg).unwrap();
    println!("oracle N=16: {:.2} s (u={u:.4})", t0.elapsed().as_secs_f64());
}
