//! CSV renderings of study artifacts. Every table starts with a header naming
//! columns and units (`[1]` marks dimensionless quantities). Numbers use Rust's
//! shortest round-trip `{:e}` form, so identical inputs give identical bytes.

use std::fmt::Write;

use nalgebra::DMatrix;

use crate::experiment::{Check, LengthResult};
use crate::fields::FieldSample;
use crate::modes::ModalBasis;
use crate::scalar::{Complex, Float};

fn num<T: Float>(x: T) -> String {
    format!("{:e}", x.to_f64_lossy())
}

/// Row-major `row,col,re,im` table, indices from 0.
pub fn complex_matrix_csv<T: Float>(m: &DMatrix<Complex<T>>, unit: &str) -> String {
    let mut s = format!("row,col,re[{unit}],im[{unit}]\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let c = m[(i, j)];
            let _ = writeln!(s, "{i},{j},{},{}", num(c.re), num(c.im));
        }
    }
    s
}

/// Same layout as [`complex_matrix_csv`] with a zero imaginary column.
pub fn real_matrix_csv<T: Float>(m: &DMatrix<T>, unit: &str) -> String {
    complex_matrix_csv(&m.map(|x| Complex::new(x, T::zero())), unit)
}

pub fn eigenvalues_csv<T: Float>(basis: &ModalBasis<T>) -> String {
    let mut s = String::from("mode,eigenvalue[1],modal_significance[1],characteristic_angle[deg]\n");
    for (n, &l) in basis.eigenvalues.iter().enumerate() {
        let ms = T::one() / (T::one() + l * l).sqrt();
        let angle = T::lit(180.0) - l.atan() * T::lit(180.0) / T::pi();
        let _ = writeln!(s, "{},{},{},{}", n + 1, num(l), num(ms), num(angle));
    }
    s
}

/// One labelled field sample per row; `rel_error` is against the row labelled
/// `direct` for the same point, empty for that row itself.
pub fn field_csv<T: Float>(rows: &[(usize, &str, &FieldSample<T>, Option<T>)]) -> String {
    let mut s = String::from(
        "point,x[m],y[m],z[m],source,ex_re[V/m],ex_im[V/m],ey_re[V/m],ey_im[V/m],ez_re[V/m],ez_im[V/m],rel_error[1]\n",
    );
    for (point, source, f, err) in rows {
        let p = &f.position;
        let _ = write!(s, "{point},{},{},{},{source}", num(p.x), num(p.y), num(p.z));
        for c in f.e.iter() {
            let _ = write!(s, ",{},{}", num(c.re), num(c.im));
        }
        let _ = writeln!(s, ",{}", err.map(num).unwrap_or_default());
    }
    s
}

/// The three fields of every observation point for one swept length.
pub fn length_field_csv<T: Float>(res: &LengthResult<T>) -> String {
    let mut rows = Vec::new();
    for (i, p) in res.points.iter().enumerate() {
        rows.push((i, "direct", &p.direct, None));
        rows.push((i, "reconstruction", &p.reconstructed, Some(p.reconstruction_error())));
        rows.push((i, "p_prime", &p.naive, Some(p.naive_error())));
    }
    field_csv(&rows)
}

pub fn convergence_csv<T: Float>(results: &[LengthResult<T>], wavelength: T) -> String {
    let mut s = String::from("length[lambda0],length[m],point,modes[1],rel_error[1]\n");
    for r in results {
        for (i, p) in r.points.iter().enumerate() {
            for &(n, e) in &p.convergence {
                let _ = writeln!(s, "{},{},{i},{n},{}", num(r.length / wavelength), num(r.length), num(e));
            }
        }
    }
    s
}

/// `length` is empty for checks that do not belong to a swept length.
pub fn verification_csv(rows: &[(Option<f64>, &Check)]) -> String {
    let mut s = String::from("length[lambda0],check,value[1],limit[1],status\n");
    for (l, c) in rows {
        let status = if c.passed() { "pass" } else { "FAIL" };
        let l = l.map(|l| format!("{l:e}")).unwrap_or_default();
        let _ = writeln!(s, "{l},{},{:e},{:e},{status}", c.name, c.value, c.limit);
    }
    s
}
