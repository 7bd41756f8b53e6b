use gauge_p::linalg::{complex_orthogonal_diagonalize, CMatrix};
use num_complex::Complex;

type C64 = Complex<f64>;

fn offdiag(m: &CMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..m.rows {
        for j in 0..m.cols {
            if i != j {
                s += m[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn trace_jacobi(a: &CMatrix) {
    let n = a.rows;
    let mut m = a.clone();
    for iter in 0..40 {
        let mut off = 0.0f64;
        let (mut p, mut q) = (0usize, 1usize);
        for i in 0..n {
            for j in (i + 1)..n {
                if m[(i, j)].norm() > off {
                    off = m[(i, j)].norm();
                    (p, q) = (i, j);
                }
            }
        }
        println!(
            "  it {iter}: offF = {:.3e}, pivot ({p},{q}) = {:.3e}, maxabs {:.3e}",
            offdiag(&m),
            off,
            m.max_abs()
        );
        if off < 1e-14 {
            break;
        }
        let apq = m[(p, q)];
        let tau = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
        let root = (tau * tau + 1.0).sqrt();
        let t1 = tau + root;
        let t2 = tau - root;
        let t = if t1.norm() <= t2.norm() { t1 } else { t2 };
        let c = 1.0 / (1.0 + t * t).sqrt();
        let s = t * c;
        for k in 0..n {
            let mp = m[(p, k)];
            let mq = m[(q, k)];
            m[(p, k)] = c * mp + s * mq;
            m[(q, k)] = -s * mp + c * mq;
        }
        for k in 0..n {
            let mp = m[(k, p)];
            let mq = m[(k, q)];
            m[(k, p)] = c * mp + s * mq;
            m[(k, q)] = -s * mp + c * mq;
        }
    }
}

fn main() {
    let mut seed = 0x12345u64;
    let mut next = move || {
        seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    for n in [2usize, 3, 4, 6] {
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let z = C64::new(next(), next());
                a[(i, j)] = z;
                a[(j, i)] = z;
            }
        }
        match complex_orthogonal_diagonalize(&a) {
            Ok((o, lambda)) => {
                let recon = o.mul(&CMatrix::diagonal(&lambda)).mul(&o.transpose());
                println!(
                    "n={n}: ok, recon err = {:.3e}, ortho err = {:.3e}",
                    recon.sub(&a).frobenius() / a.frobenius(),
                    o.mul(&o.transpose()).sub(&CMatrix::identity(n)).frobenius()
                );
            }
            Err(e) => {
                println!("n={n}: FAILED: {e}");
                if n == 3 {
                    trace_jacobi(&a);
                }
            }
        }
    }
}
