//! CSV rows for spectral data.
//!
//! Column order: the m arguments (descending), then C column by column
//! (`c¹` real, then Re/Im pairs for the remaining rows), then U row-major
//! as Re/Im pairs, then Re and Im of tr U.

use crate::spectral::SpectralData;

pub fn csv_header(n: usize, m: usize) -> String {
    let mut cols: Vec<String> = (1..=m).map(|k| format!("arg_t{k}")).collect();
    for k in 1..=m {
        cols.push(format!("c{k}_1"));
        for j in 2..=n {
            cols.push(format!("c{k}_{j}_re"));
            cols.push(format!("c{k}_{j}_im"));
        }
    }
    for i in 1..=n {
        for j in 1..=n {
            cols.push(format!("u{i}{j}_re"));
            cols.push(format!("u{i}{j}_im"));
        }
    }
    cols.push("tr_u_re".into());
    cols.push("tr_u_im".into());
    cols.join(",")
}

pub fn csv_row(sd: &SpectralData) -> String {
    let (n, m) = (sd.n(), sd.m());
    let mut vals: Vec<f64> = sd.angles();
    for k in 0..m {
        vals.push(sd.c()[(0, k)].re);
        for j in 1..n {
            vals.push(sd.c()[(j, k)].re);
            vals.push(sd.c()[(j, k)].im);
        }
    }
    for z in sd.u().to_row_major() {
        vals.push(z.re);
        vals.push(z.im);
    }
    let tr = sd.u().trace();
    vals.push(tr.re);
    vals.push(tr.im);
    vals.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::BlockUnitary;
    use crate::spectral::extract_direct;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_and_row_widths_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let sd = extract_direct(&BlockUnitary::haar(2, 3, &mut rng)).unwrap();
        let h = csv_header(2, 3);
        let r = csv_row(&sd);
        assert_eq!(h.split(',').count(), r.split(',').count());
        // 3 angles + 3 × (1 + 2) c-columns + 8 for U + 2 for tr U
        assert_eq!(h.split(',').count(), 22);
        assert!(h.starts_with("arg_t1,arg_t2,arg_t3,c1_1,c1_2_re"));
    }
}
