//! Path signatures of piecewise-linear paths.
//!
//! A [`Path`] is interpreted as the piecewise-linear interpolant of its
//! vertices. Its truncated [`Signature`] is assembled segment by segment:
//! a straight segment with increment `Δ` has level-`k` block `Δ^{⊗k}/k!`,
//! and consecutive pieces are joined with Chen's identity.

mod io;
mod path;
mod signature;
mod warp;

pub use io::{path_from_csv, path_from_json, path_to_csv, path_to_json};
pub(crate) use io::format_f64 as io_format;
pub use path::Path;
pub use signature::{
    chen_concat, segment_signature, signature, signature_with_budget, Signature,
    DEFAULT_COEFF_BUDGET,
};
pub use warp::{reparametrize, Warp};

use crate::Result;

/// Reverses the direction of travel. Timestamps are remapped as
/// `t_i -> a + b - t_{s-1-i}` so they stay increasing on the same span.
pub fn time_reverse(path: &Path) -> Path {
    let s = path.len();
    let (a, b) = path.span();
    let times: Vec<f64> = (0..s).map(|i| a + b - path.times()[s - 1 - i]).collect();
    let mut points = Vec::with_capacity(s * path.dim());
    for i in (0..s).rev() {
        points.extend_from_slice(path.vertex(i));
    }
    Path::new_unchecked(times, points, path.dim())
}

/// Appends the normalised time `(t - a)/(b - a)` as an extra coordinate.
pub fn augment_time(path: &Path) -> Path {
    let c = path.dim();
    let (a, b) = path.span();
    let span = b - a;
    let mut points = Vec::with_capacity(path.len() * (c + 1));
    for (i, &t) in path.times().iter().enumerate() {
        points.extend_from_slice(path.vertex(i));
        points.push((t - a) / span);
    }
    Path::new_unchecked(path.times().to_vec(), points, c + 1)
}

/// Inserts the midpoint (in time and space) of every segment.
pub fn subdivide(path: &Path) -> Path {
    let c = path.dim();
    let s = path.len();
    let mut times = Vec::with_capacity(2 * s - 1);
    let mut points = Vec::with_capacity((2 * s - 1) * c);
    for i in 0..s {
        if i > 0 {
            let (p, q) = (path.vertex(i - 1), path.vertex(i));
            times.push(0.5 * (path.times()[i - 1] + path.times()[i]));
            points.extend(p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)));
        }
        times.push(path.times()[i]);
        points.extend_from_slice(path.vertex(i));
    }
    Path::new_unchecked(times, points, c)
}

/// Inserts the midpoint of the single segment `seg` (between vertices
/// `seg` and `seg + 1`).
pub fn insert_midpoint(path: &Path, seg: usize) -> Result<Path> {
    if seg + 1 >= path.len() {
        return Err(crate::Error::invalid(format!(
            "segment {seg} out of range for path with {} vertices",
            path.len()
        )));
    }
    let c = path.dim();
    let mut times = path.times().to_vec();
    let mut points = path.points().to_vec();
    let t = 0.5 * (times[seg] + times[seg + 1]);
    let mid: Vec<f64> = path
        .vertex(seg)
        .iter()
        .zip(path.vertex(seg + 1))
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    times.insert(seg + 1, t);
    let at = (seg + 1) * c;
    points.splice(at..at, mid);
    Path::new(times, points, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(a: [f64; 2], b: [f64; 2]) -> Path {
        Path::new(vec![0.0, 1.0], vec![a[0], a[1], b[0], b[1]], 2).unwrap()
    }

    #[test]
    fn reverse_is_involution() {
        let p = Path::new(vec![0.0, 0.3, 1.7], vec![0.0, 1.0, 2.0, -1.0, 0.5, 0.5], 2).unwrap();
        let rr = time_reverse(&time_reverse(&p));
        assert_eq!(rr.points(), p.points());
        for (a, b) in rr.times().iter().zip(p.times()) {
            assert!((a - b).abs() < 1e-12);
        }
        let q = Path::new(vec![0.0, 0.25, 1.0], vec![0.0, 1.0, 2.0], 1).unwrap();
        assert_eq!(time_reverse(&time_reverse(&q)), q);
    }

    #[test]
    fn reversed_segment_negates_displacement() {
        let r = time_reverse(&seg([0.0, 0.0], [1.0, 2.0]));
        assert_eq!(r.vertex(0), &[1.0, 2.0]);
        assert_eq!(r.vertex(1), &[0.0, 0.0]);
        let s = signature(&r, 1).unwrap();
        assert_eq!(s.level(1), &[-1.0, -2.0]);
    }

    #[test]
    fn augment_1d() {
        let p = Path::new(vec![0.0, 1.0], vec![0.0, 1.0], 1).unwrap();
        let q = augment_time(&p);
        assert_eq!(q.dim(), 2);
        assert_eq!(q.points(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn augmentation_separates_tree_like_paths() {
        // 0 -> 1 -> 0 and 0 -> 0.5 -> 0 both have trivial signatures.
        let x = Path::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0], 1).unwrap();
        let y = Path::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 0.0], 1).unwrap();
        let sx = signature(&x, 2).unwrap();
        let sy = signature(&y, 2).unwrap();
        assert!(sx.max_abs_diff(&sy) < 1e-15);
        let ax = signature(&augment_time(&x), 2).unwrap();
        let ay = signature(&augment_time(&y), 2).unwrap();
        // level-2 entry (x, t) is the area under x(t).
        let d = ax.level(2)[1] - ay.level(2)[1];
        assert!((d - 0.25).abs() < 1e-12, "d = {d}");
    }

    #[test]
    fn midpoint_insertion_out_of_range() {
        let p = seg([0.0, 0.0], [1.0, 1.0]);
        assert!(insert_midpoint(&p, 1).is_err());
        let q = insert_midpoint(&p, 0).unwrap();
        assert_eq!(q.len(), 3);
        assert_eq!(q.vertex(1), &[0.5, 0.5]);
    }

    #[test]
    fn subdivide_doubles_segments() {
        let p = Path::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 4.0], 1).unwrap();
        let q = subdivide(&p);
        assert_eq!(q.times(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(q.points(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
    }
}
