use serde::{Deserialize, Serialize};

use crate::sigcore::Path;
use crate::sigkernel::{gram, SigKernelSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diversity {
    /// Mean pairwise distance `√(2 − 2k̃)`.
    pub mean_distance: f64,
    /// Clusters under single linkage at the threshold.
    pub modes: usize,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Diversity of a set of paths under the normalized signature kernel.
pub fn diversity_metric(paths: &[Path], spec: &SigKernelSpec, tau: f64) -> Result<Diversity> {
    let n = paths.len();
    if n < 2 {
        return Err(Error::invalid("diversity needs at least 2 paths"));
    }
    let g = gram(paths, spec)?.normalized();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            // clamp guards rounding above 1
            let d = (2.0 - 2.0 * g.get(i, j).min(1.0)).sqrt();
            sum += d;
            if d < tau {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let modes = (0..n).filter(|&i| find(&mut parent, i) == i).count();
    Ok(Diversity { mean_distance: sum / (n * (n - 1) / 2) as f64, modes })
}
