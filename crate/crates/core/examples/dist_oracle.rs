// scratch: compute pauli distances + overall class distances at d=3, d=5
use hetqec::code::build_css;
use hetqec::pauli::{Letter, PauliOp};

fn main() {
    for d in [3usize, 5] {
        let css = build_css(d).unwrap();
        let xy = css.apply_xy_deformation().unwrap();
        println!("d={d} CSS pauli_distances (X,Y,Z): {:?}", css.pauli_distances().unwrap());
        println!("d={d} XY  pauli_distances (X,Y,Z): {:?}", xy.pauli_distances().unwrap());
    }
    // full-coset distance oracle at d=3: enumerate ALL 4^9 Paulis
    let css = build_css(3).unwrap();
    let xy = css.apply_xy_deformation().unwrap();
    for (name, code) in [("CSS", &css), ("XY", &xy)] {
        let mut best = [usize::MAX; 4];
        for idx in 0..4usize.pow(9) {
            let mut letters = Vec::with_capacity(9);
            let mut t = idx;
            for _ in 0..9 {
                letters.push(Letter::ALL[t % 4]);
                t /= 4;
            }
            let op = PauliOp::from_letters(&letters);
            if code.syndrome(&op).unwrap().iter().any(|&b| b) { continue; }
            let class = code.logical_class(&op).unwrap();
            if class == Letter::I { continue; }
            let w = op.weight();
            if w < best[class.index()] { best[class.index()] = w; }
        }
        println!("{name} d=3 min coset weights (X,Y,Z): {} {} {}", best[1], best[2], best[3]);
    }
}
