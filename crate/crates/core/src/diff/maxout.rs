use super::tape::{CustomOp, Tape, Var};
use super::tensor::Tensor;

/// Maximum across the branch axis of a `[.., d, n]` tensor.
struct Maxout;

fn split(shape: &[usize]) -> (usize, usize, usize) {
    assert!(shape.len() >= 2, "maxout needs a [.., d, n] tensor");
    let n = shape[shape.len() - 1];
    let d = shape[shape.len() - 2];
    let outer = shape[..shape.len() - 2].iter().product();
    (outer, d, n)
}

/// Index of the winning branch; the lowest index wins ties.
#[inline]
fn winner(x: &[f64], base: usize, d: usize, n: usize, j: usize) -> usize {
    let mut best = 0;
    let mut best_v = x[base + j];
    for m in 1..d {
        let v = x[base + m * n + j];
        if v > best_v {
            best = m;
            best_v = v;
        }
    }
    best
}

impl CustomOp for Maxout {
    fn name(&self) -> &'static str {
        "maxout_reduce"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Tensor {
        let x = inputs[0];
        let (outer, d, n) = split(x.shape());
        let data = x.data();
        let mut out = Vec::with_capacity(outer * n);
        for o in 0..outer {
            let base = o * d * n;
            for j in 0..n {
                out.push(data[base + winner(data, base, d, n, j) * n + j]);
            }
        }
        let mut shape = x.shape()[..x.shape().len() - 2].to_vec();
        shape.push(n);
        Tensor::from_parts(shape, out)
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _output: &Tensor,
        grad: &[f64],
    ) -> Vec<Option<Vec<f64>>> {
        let x = inputs[0];
        let (outer, d, n) = split(x.shape());
        let data = x.data();
        let mut dx = vec![0.0; data.len()];
        for o in 0..outer {
            let base = o * d * n;
            for j in 0..n {
                dx[base + winner(data, base, d, n, j) * n + j] = grad[o * n + j];
            }
        }
        vec![Some(dx)]
    }
}

/// Elementwise max over branches; each output gradient goes entirely to the winning branch.
pub fn maxout_reduce(tape: &mut Tape, branches: Var) -> Var {
    tape.custom(Box::new(Maxout), &[branches])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_the_larger_branch() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::new(vec![2, 1], vec![0.2, -0.1]).unwrap());
        let y = maxout_reduce(&mut tape, x);
        assert_eq!(tape.value(y).data(), &[0.2]);
    }

    #[test]
    fn single_branch_is_identity() {
        let mut tape = Tape::new();
        let vals = vec![0.3, -1.0, 2.5];
        let x = tape.input(Tensor::new(vec![1, 3], vals.clone()).unwrap());
        let y = maxout_reduce(&mut tape, x);
        assert_eq!(tape.value(y).data(), vals.as_slice());
    }

    #[test]
    fn tie_routes_to_lowest_branch() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::new(vec![2, 1], vec![0.3, 0.3]).unwrap());
        let y = maxout_reduce(&mut tape, x);
        assert_eq!(tape.value(y).data(), &[0.3]);
        let s = tape.mean(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn batched_layout() {
        // [batch=2, d=2, n=2]
        let mut tape = Tape::new();
        let x = tape.input(
            Tensor::new(
                vec![2, 2, 2],
                vec![1.0, 5.0, 2.0, 4.0, -1.0, 0.0, -2.0, 3.0],
            )
            .unwrap(),
        );
        let y = maxout_reduce(&mut tape, x);
        assert_eq!(tape.value(y).shape(), &[2, 2]);
        assert_eq!(tape.value(y).data(), &[2.0, 5.0, -1.0, 3.0]);
    }
}
