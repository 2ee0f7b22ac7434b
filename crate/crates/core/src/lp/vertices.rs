use super::{LpError, LpProblem};

/// Variable count above which [`enumerate_vertices`] refuses to run.
pub const MAX_ENUMERATION_VARS: usize = 10;

#[derive(Clone, Copy)]
enum Role {
    Free,
    AtLower,
    AtUpper,
}

/// Brute-force enumeration of the basic feasible points of `p`.
///
/// Every assignment of each variable to {free, at lower bound, at upper bound}
/// is tried; an assignment yields a vertex when the free columns have full
/// column rank, the induced system is consistent, and the solution respects
/// all bounds. Intended as a test oracle for tiny problems.
pub fn enumerate_vertices(p: &LpProblem) -> Result<Vec<Vec<f64>>, LpError> {
    p.check_shape()?;
    let n = p.num_vars();
    if n > MAX_ENUMERATION_VARS {
        return Err(LpError::TooLarge {
            max: MAX_ENUMERATION_VARS,
            got: n,
        });
    }
    let tol = 1e-9;
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut roles = vec![Role::Free; n];
    let total = 3usize.pow(n as u32);
    'assign: for code in 0..total {
        let mut c = code;
        for (j, role) in roles.iter_mut().enumerate() {
            *role = match c % 3 {
                0 => Role::Free,
                1 => Role::AtLower,
                _ => Role::AtUpper,
            };
            c /= 3;
            match *role {
                Role::AtLower if !p.lo[j].is_finite() => continue 'assign,
                Role::AtUpper if !p.hi[j].is_finite() || p.hi[j] == p.lo[j] => continue 'assign,
                _ => {}
            }
        }
        if let Some(x) = solve_assignment(p, &roles, tol) {
            if !out
                .iter()
                .any(|v| v.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-9))
            {
                out.push(x);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

fn solve_assignment(p: &LpProblem, roles: &[Role], tol: f64) -> Option<Vec<f64>> {
    let (m, n) = (p.num_rows(), p.num_vars());
    let mut x = vec![0.0; n];
    let free: Vec<usize> = (0..n).filter(|&j| matches!(roles[j], Role::Free)).collect();
    if free.len() > m {
        return None;
    }
    for j in 0..n {
        match roles[j] {
            Role::AtLower => x[j] = p.lo[j],
            Role::AtUpper => x[j] = p.hi[j],
            Role::Free => {}
        }
    }
    // Augmented system [A_F | b − A_fixed x_fixed].
    let k = free.len();
    let mut aug = vec![0.0; m * (k + 1)];
    for i in 0..m {
        let row = p.row(i);
        let mut rhs = p.b[i];
        for j in 0..n {
            if !matches!(roles[j], Role::Free) {
                rhs -= row[j] * x[j];
            }
        }
        for (c, &j) in free.iter().enumerate() {
            aug[i * (k + 1) + c] = row[j];
        }
        aug[i * (k + 1) + k] = rhs;
    }
    // Gaussian elimination with partial pivoting.
    let w = k + 1;
    let mut pivot_row = 0;
    for col in 0..k {
        let (best, mag) = (pivot_row..m)
            .map(|r| (r, aug[r * w + col].abs()))
            .fold((pivot_row, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if mag < 1e-11 {
            return None;
        }
        for c in 0..w {
            aug.swap(pivot_row * w + c, best * w + c);
        }
        let pv = aug[pivot_row * w + col];
        for r in 0..m {
            if r == pivot_row {
                continue;
            }
            let f = aug[r * w + col] / pv;
            if f != 0.0 {
                for c in col..w {
                    aug[r * w + c] -= f * aug[pivot_row * w + c];
                }
            }
        }
        pivot_row += 1;
    }
    // Remaining rows must be consistent.
    for r in k..m {
        if aug[r * w + k].abs() > 1e-8 {
            return None;
        }
    }
    for (c, &j) in free.iter().enumerate() {
        x[j] = aug[c * w + k] / aug[c * w + c];
        if x[j] < p.lo[j] - tol || x[j] > p.hi[j] + tol {
            return None;
        }
    }
    Some(x)
}
