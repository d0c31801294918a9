//! Minimum-image distances and the periodic k-NN graph on a random cloud.
//!
//!     cargo run --example periodic_knn -- 200 12

use pbc_diffusion::geometry::{knn_graph_with, KnnMethod};
use pbc_diffusion::Box3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pbc_diffusion::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(200, |a| a.parse().expect("N"));
    let k: usize = args.next().map_or(12, |a| a.parse().expect("k"));

    let bbox = Box3::new([6.0, 6.0, 8.0])?;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let l = bbox.lengths();
    let points: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.gen::<f64>() * l[0], rng.gen::<f64>() * l[1], rng.gen::<f64>() * l[2]])
        .collect();

    let (a, b) = ([0.2, 0.1, 7.9], [5.9, 5.8, 0.3]);
    println!("min_image({a:?}, {b:?}) = {:?}", bbox.min_image(&a, &b)?);
    println!("distance = {:.4}", bbox.distance(&a, &b)?);

    let brute = knn_graph_with(&points, k, &bbox, KnnMethod::AllPairs)?;
    let cells = knn_graph_with(&points, k, &bbox, KnnMethod::CellList)?;
    assert_eq!(brute.targets(), cells.targets());
    println!("{} nodes, {} edges; cell list agrees with all-pairs", brute.n_nodes(), brute.n_edges());

    let nearest: Vec<f64> = (0..n)
        .map(|i| {
            let e = i * k;
            brute.displacements()[e].iter().map(|d| d * d).sum::<f64>().sqrt()
        })
        .collect();
    let mean = nearest.iter().sum::<f64>() / n as f64;
    println!("mean nearest-neighbour distance {mean:.4}");
    println!("neighbours of particle 0: {:?}", brute.neighbors(0));
    Ok(())
}
