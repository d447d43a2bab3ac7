//! Choice functions: scalar argmax, Pareto maximality, union of argmaxes
//! (e-admissibility) and the semiorder with a discernibility band.

use super::GroundTruthUtility;

/// Anything that maps a menu of grid indices to a chosen subset.
pub trait Chooser {
    fn choose(&self, menu: &[usize]) -> Vec<usize>;
}

impl<F> Chooser for F
where
    F: Fn(&[usize]) -> Vec<usize>,
{
    fn choose(&self, menu: &[usize]) -> Vec<usize> {
        self(menu)
    }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Menu items no other item beats under `nu`.
pub fn choose_scalar(menu: &[usize], nu: &[f64]) -> Vec<usize> {
    let best = menu.iter().map(|&i| nu[i]).fold(f64::NEG_INFINITY, f64::max);
    sorted(menu.iter().copied().filter(|&i| nu[i] >= best).collect())
}

fn strictly_dominates(nu: &GroundTruthUtility, y: usize, z: usize) -> bool {
    nu.rows().iter().all(|row| row[y] > row[z])
}

/// Menu items not strictly dominated in every coordinate by another item.
pub fn choose_pareto(menu: &[usize], nu: &GroundTruthUtility) -> Vec<usize> {
    sorted(menu.iter().copied().filter(|&z| !menu.iter().any(|&y| strictly_dominates(nu, y, z))).collect())
}

/// Union over utilities of each utility's argmax set on the menu.
pub fn choose_union_argmax(menu: &[usize], nu: &GroundTruthUtility) -> Vec<usize> {
    let mut out = Vec::new();
    for row in nu.rows() {
        out.extend(choose_scalar(menu, row));
    }
    sorted(out)
}

/// Binary choice with an indifference band of half-width `sigma`; the band
/// boundary is inclusive.
pub fn choose_semiorder(z: usize, y: usize, nu: &[f64], sigma: f64) -> Vec<usize> {
    if nu[z] > nu[y] + sigma {
        vec![z]
    } else if nu[y] > nu[z] + sigma {
        vec![y]
    } else {
        sorted(vec![z, y])
    }
}

fn subset(ground: &[usize], mask: usize) -> Vec<usize> {
    ground.iter().enumerate().filter(|(bit, _)| mask & (1 << bit) != 0).map(|(_, &g)| g).collect()
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u = a.to_vec();
    u.extend_from_slice(b);
    sorted(u)
}

/// Exhaustively checks `C(A ∪ B) = C(C(A) ∪ B)` for all nonempty subsets
/// `A, B` of `ground`. Intended for at most six elements.
pub fn check_path_independence<C: Chooser + ?Sized>(chooser: &C, ground: &[usize]) -> bool {
    find_path_violation(chooser, ground).is_none()
}

/// First `(A, B)` violating path independence, if any.
pub fn find_path_violation<C: Chooser + ?Sized>(chooser: &C, ground: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
    assert!(ground.len() <= 16, "exhaustive enumeration over {} elements", ground.len());
    let full = 1usize << ground.len();
    for ma in 1..full {
        let a = subset(ground, ma);
        let ca = sorted(chooser.choose(&a));
        for mb in 1..full {
            let b = subset(ground, mb);
            let lhs = sorted(chooser.choose(&union(&a, &b)));
            let rhs = sorted(chooser.choose(&union(&ca, &b)));
            if lhs != rhs {
                return Some((a, b));
            }
        }
    }
    None
}
