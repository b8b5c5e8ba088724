//! Small dense vector helpers for `ℝ^d` with `d` a handful.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm2(a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s·b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn unit(dim: usize, i: usize, sign: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = sign;
    v
}

/// Unit vector in the direction of `a`, or `None` for (near) zero vectors.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    (n > 1e-300 && n.is_finite()).then(|| scale(a, 1.0 / n))
}

pub fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Modified Gram-Schmidt; drops vectors dependent on earlier ones.
pub fn orthonormalize(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for q in &out {
            let c = dot(&w, q);
            w = axpy(&w, -c, q);
        }
        if let Some(u) = normalized(&w) {
            if norm(&w) > 1e-10 * norm(v).max(1.0) {
                out.push(u);
            }
        }
    }
    out
}

pub fn project_onto_span(v: &[f64], orthonormal: &[Vec<f64>]) -> Vec<f64> {
    let mut p = vec![0.0; v.len()];
    for q in orthonormal {
        p = axpy(&p, dot(v, q), q);
    }
    p
}

/// Orthonormal basis of the complement of `span(orthonormal)` in `ℝ^dim`.
pub fn orthogonal_complement(orthonormal: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = orthonormal.to_vec();
    let k = all.len();
    for i in 0..dim {
        let e = unit(dim, i, 1.0);
        let mut w = e;
        for q in &all {
            let c = dot(&w, q);
            w = axpy(&w, -c, q);
        }
        if norm(&w) > 1e-8 {
            all.push(scale(&w, 1.0 / norm(&w)));
        }
    }
    all.split_off(k)
}

/// Nonnegative least squares `min ‖A λ − b‖, λ ≥ 0` (Lawson-Hanson), with the
/// columns of `A` given as `cols`. Returns the coefficients.
pub fn nnls(cols: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = cols.len();
    let m = b.len();
    let mut x = vec![0.0; n];
    if n == 0 {
        return x;
    }
    let mut passive = vec![false; n];
    let tol = 1e-12 * (1.0 + norm(b)) * cols.iter().map(|c| norm(c)).fold(1.0, f64::max);
    let residual = |x: &[f64]| {
        let mut r = b.to_vec();
        for (j, c) in cols.iter().enumerate() {
            if x[j] != 0.0 {
                for i in 0..m {
                    r[i] -= x[j] * c[i];
                }
            }
        }
        r
    };
    for _outer in 0..(3 * n + 10) {
        let r = residual(&x);
        let w: Vec<f64> = cols.iter().map(|c| dot(c, &r)).collect();
        let pick = (0..n).filter(|&j| !passive[j]).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = pick else { break };
        if w[t] <= tol {
            break;
        }
        passive[t] = true;
        for _inner in 0..(3 * n + 10) {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = least_squares(&idx.iter().map(|&j| cols[j].as_slice()).collect::<Vec<_>>(), b);
            if z.iter().all(|&v| v > 0.0) {
                for j in 0..n {
                    x[j] = 0.0;
                }
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    let a = x[j] / (x[j] - z[k]);
                    if a < alpha {
                        alpha = a;
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    x
}

/// Least squares on the given columns through normal equations with a tiny
/// ridge and refinement; the column counts used here are at most a few times the dimension.
fn least_squares(cols: &[&[f64]], b: &[f64]) -> Vec<f64> {
    let k = cols.len();
    let mut g = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            g[i][j] = dot(cols[i], cols[j]);
        }
        rhs[i] = dot(cols[i], b);
    }
    let mut reg = g.clone();
    for (i, row) in reg.iter_mut().enumerate() {
        row[i] += 1e-14 * (1.0 + g[i][i]);
    }
    // iterative refinement removes the ridge bias
    let mut z = solve(reg.clone(), rhs.clone());
    for _ in 0..2 {
        let r: Vec<f64> = (0..k).map(|i| rhs[i] - dot(&g[i], &z)).collect();
        let dz = solve(reg.clone(), r);
        z = add(&z, &dz);
    }
    z
}

/// Unconstrained least squares `min ‖A z − b‖` on the given columns.
pub fn least_squares_cols(cols: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    least_squares(&cols.iter().map(|c| c.as_slice()).collect::<Vec<_>>(), b)
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        if d.abs() < 1e-300 {
            continue;
        }
        for row in col + 1..n {
            let f = a[row][col] / d;
            if f != 0.0 {
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = if a[row][row].abs() < 1e-300 { 0.0 } else { s / a[row][row] };
    }
    x
}

/// Unit directions: `{-1, +1}` for `d = 1`, 360 equispaced angles for `d = 2`,
/// the level-3 icosphere (642 vertices) for `d = 3`.
pub fn direction_grid(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![-1.0], vec![1.0]],
        2 => (0..360)
            .map(|k| {
                let a = (k as f64).to_radians();
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => icosphere(3),
        _ => {
            let mut v = Vec::new();
            for i in 0..dim {
                v.push(unit(dim, i, -1.0));
                v.push(unit(dim, i, 1.0));
            }
            v
        }
    }
}

/// Largest angle from any unit vector to the nearest grid direction, as a chord
/// length bound (0 for `d = 1`).
pub fn grid_pitch(dim: usize) -> f64 {
    match dim {
        1 => 0.0,
        2 => 2.0 * (std::f64::consts::PI / 360.0).sin(),
        3 => {
            // Covering radius of the level-3 icosphere, measured once.
            static PITCH: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
            *PITCH.get_or_init(|| {
                let g = icosphere(3);
                let mut worst = 0.0_f64;
                for p in &g {
                    let mut best = f64::INFINITY;
                    for q in &g {
                        let d = dist(p, q);
                        if d > 1e-12 && d < best {
                            best = d;
                        }
                    }
                    worst = worst.max(best);
                }
                worst
            })
        }
        _ => std::f64::consts::SQRT_2,
    }
}

fn icosphere(level: usize) -> Vec<Vec<f64>> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| normalized(v).unwrap())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache = std::collections::HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec<f64>>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let m = normalized(&add(&verts[a], &verts[b])).unwrap();
                verts.push(m);
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = mid(f[0], f[1], &mut verts);
            let bc = mid(f[1], f[2], &mut verts);
            let ca = mid(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    verts
}

/// Evenly spread unit directions for probing in `ℝ^dim` (`count` of them).
pub fn probe_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count.max(4))
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count.max(4) as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci sphere
            let n = count.max(6);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => direction_grid(dim),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_level_three_has_642_vertices() {
        assert_eq!(direction_grid(3).len(), 642);
        assert!(grid_pitch(3) < 0.2);
    }

    #[test]
    fn nnls_projects_onto_orthant() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let x = nnls(&cols, &[2.0, -3.0]);
        assert!((x[0] - 2.0).abs() < 1e-12 && x[1] == 0.0);
    }

    #[test]
    fn nnls_many_columns() {
        let cols = direction_grid(2);
        let x = nnls(&cols, &[0.3, 0.4]);
        let mut r = vec![0.3, 0.4];
        for (j, c) in cols.iter().enumerate() {
            r = axpy(&r, -x[j], c);
        }
        assert!(norm(&r) < 1e-10);
        assert!(x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn complement_of_axis() {
        let c = orthogonal_complement(&[vec![1.0, 0.0, 0.0]], 3);
        assert_eq!(c.len(), 2);
        for v in &c {
            assert!(v[0].abs() < 1e-12);
        }
    }
}
