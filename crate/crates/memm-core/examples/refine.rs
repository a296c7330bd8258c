use memm_core::grid::Grid;
use memm_core::ipde::{picard_solve, PicardConfig, SourceKind};
use memm_core::modelfile::ModelFile;

fn main() {
    let built = ModelFile::preset("single-atom").unwrap().build().unwrap();
    let model = &built.model;
    let mut vals = Vec::new();
    for n in [9usize, 17, 33, 65, 129] {
        let grid = Grid::uniform(1.0, n, 0.5, 2.0, n).unwrap();
        let sol = picard_solve(model, &grid, &SourceKind::Memm, &PicardConfig::default()).unwrap();
        let u0 = sol.surface.eval(0.0, 1.0).0;
        vals.push(u0);
        println!("n={n:4} u(0,v0)={u0:.14}");
    }
    for w in vals.windows(3) {
        let e1 = (w[0] - w[1]).abs();
        let e2 = (w[1] - w[2]).abs();
        println!("delta {:.3e} -> {:.3e} ratio {:.2}", e1, e2, e1 / e2);
    }
}
