//! Masking MCDC over a decision tree of atoms.

use crate::rules::Decision;

pub const MAX_ATOMS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MaskingError {
    #[error("{atoms} atoms exceed the limit of {MAX_ATOMS}")]
    TooManyAtoms { atoms: usize },
    #[error("atom {atom} cannot be shown to affect the outcome")]
    NotDeterminable { atom: usize },
}

/// One selected truth assignment. `shows` is the atom whose independence
/// pair this assignment completes or starts; `None` for the all-true start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub assignment: Vec<bool>,
    pub shows: Option<usize>,
}

/// Whether `atom` determines the outcome of `d` under `a` with every other
/// operand of its enclosing operators masked: AND siblings true, OR
/// siblings false.
pub fn masked_determining(d: &Decision, a: &[bool], atom: usize) -> bool {
    fn walk(d: &Decision, a: &[bool], atom: usize) -> Option<bool> {
        match d {
            Decision::Atom(i) => (*i == atom).then_some(true),
            Decision::And(v) | Decision::Or(v) => {
                let neutral = matches!(d, Decision::And(_));
                let (k, open) = v.iter().enumerate().find_map(|(k, c)| walk(c, a, atom).map(|o| (k, o)))?;
                Some(open && v.iter().enumerate().all(|(j, c)| j == k || c.eval(a) == neutral))
            }
        }
    }
    walk(d, a, atom).unwrap_or(false)
}

/// Assignment number `k` in lexicographic order, true before false.
fn assignment(k: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| k >> (n - 1 - i) & 1 == 0).collect()
}

/// Greedy masking-MCDC set. Starts from the all-true assignment and adds,
/// one at a time, the assignment that completes the most independence
/// pairs; when none completes a pair, the one starting the most. Ties go
/// to the lexicographically first assignment.
pub fn derive_condition_variants(d: &Decision, n: usize) -> Result<Vec<Variant>, MaskingError> {
    if n > MAX_ATOMS {
        return Err(MaskingError::TooManyAtoms { atoms: n });
    }
    let total = 1usize << n;
    let det: Vec<u32> = (0..total)
        .map(|k| {
            let a = assignment(k, n);
            (0..n).filter(|&i| masked_determining(d, &a, i)).fold(0, |m, i| m | 1 << i)
        })
        .collect();
    let polarity = |k: usize, i: usize| k >> (n - 1 - i) & 1 == 0;

    let mut chosen = vec![0usize];
    let (mut seen_t, mut seen_f) = (0u32, 0u32);
    let mark = |k: usize, t: &mut u32, f: &mut u32| {
        for i in (0..n).filter(|&i| det[k] >> i & 1 == 1) {
            if polarity(k, i) {
                *t |= 1 << i;
            } else {
                *f |= 1 << i;
            }
        }
    };
    mark(0, &mut seen_t, &mut seen_f);
    let mut out = vec![Variant { assignment: assignment(0, n), shows: None }];
    let all = if n == 0 { 0 } else { u32::MAX >> (32 - n) };
    while seen_t & seen_f != all {
        let covered = seen_t & seen_f;
        let mut best: Option<(u32, u32, usize)> = None;
        for k in (0..total).filter(|k| !chosen.contains(k)) {
            let open = det[k] & !covered;
            if open == 0 {
                continue;
            }
            let (mut gain, mut start) = (0u32, 0u32);
            for i in (0..n).filter(|&i| open >> i & 1 == 1) {
                let other = if polarity(k, i) { seen_f } else { seen_t };
                let same = if polarity(k, i) { seen_t } else { seen_f };
                if other >> i & 1 == 1 {
                    gain |= 1 << i;
                } else if same >> i & 1 == 0 {
                    start |= 1 << i;
                }
            }
            let score = (gain.count_ones(), start.count_ones());
            if score > (0, 0) && best.is_none_or(|(g, s, _)| score > (g.count_ones(), s.count_ones())) {
                best = Some((gain, start, k));
            }
        }
        let Some((gain, start, k)) = best else {
            let atom = (0..n).find(|&i| covered >> i & 1 == 0).unwrap_or(0);
            return Err(MaskingError::NotDeterminable { atom });
        };
        chosen.push(k);
        mark(k, &mut seen_t, &mut seen_f);
        let label = if gain != 0 { gain } else { start };
        out.push(Variant { assignment: assignment(k, n), shows: Some(label.trailing_zeros() as usize) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(n: usize) -> Vec<Decision> {
        (0..n).map(Decision::Atom).collect()
    }

    fn letters(v: &[Variant]) -> Vec<String> {
        v.iter().map(|x| x.assignment.iter().map(|&b| if b { 'T' } else { 'F' }).collect()).collect()
    }

    /// Independent check by boolean difference, which coincides with masked
    /// determination for read-once formulas.
    fn independence_holds(d: &Decision, n: usize, set: &[Variant]) -> bool {
        let flips = |a: &[bool], i: usize| {
            let mut b = a.to_vec();
            b[i] = !b[i];
            d.eval(a) != d.eval(&b)
        };
        (0..n).all(|i| {
            set.iter().any(|x| {
                set.iter().any(|y| {
                    x.assignment[i] != y.assignment[i]
                        && d.eval(&x.assignment) != d.eval(&y.assignment)
                        && flips(&x.assignment, i)
                        && flips(&y.assignment, i)
                })
            })
        })
    }

    #[test]
    fn conjunction_of_two() {
        let d = Decision::And(atoms(2));
        let v = derive_condition_variants(&d, 2).unwrap();
        assert_eq!(letters(&v), ["TT", "TF", "FT"]);
        assert_eq!(v[1].shows, Some(1));
        assert_eq!(v[2].shows, Some(0));
    }

    #[test]
    fn single_atom() {
        let v = derive_condition_variants(&Decision::Atom(0), 1).unwrap();
        assert_eq!(letters(&v), ["T", "F"]);
    }

    #[test]
    fn and_or_needs_five_with_all_true() {
        let a = atoms(3);
        let d = Decision::Or(vec![Decision::And(vec![a[0].clone(), a[1].clone()]), a[2].clone()]);
        let v = derive_condition_variants(&d, 3).unwrap();
        assert!(independence_holds(&d, 3, &v));
        assert_eq!(letters(&v), ["TTT", "TTF", "TFF", "TFT", "FTF"]);
        // all-true masks every atom here, so the minimum with it is 5
        for k in 0..8usize {
            for m in 0..8usize {
                for p in 0..8usize {
                    let set: Vec<Variant> = [0, k, m, p]
                        .iter()
                        .map(|&k| Variant { assignment: assignment(k, 3), shows: None })
                        .collect();
                    assert!(!independence_holds(&d, 3, &set));
                }
            }
        }
    }

    #[test]
    fn too_many_atoms() {
        let d = Decision::And(atoms(17));
        assert_eq!(derive_condition_variants(&d, 17), Err(MaskingError::TooManyAtoms { atoms: 17 }));
    }

    #[test]
    fn sixteen_atoms_fit() {
        let d = Decision::And(atoms(16));
        assert_eq!(derive_condition_variants(&d, 16).unwrap().len(), 17);
    }

    fn random_tree(rng: &mut impl rand::Rng, next: &mut usize, depth: u32) -> Decision {
        if depth == 0 || rng.gen_bool(0.35) {
            *next += 1;
            return Decision::Atom(*next - 1);
        }
        let kids = (0..rng.gen_range(2..4)).map(|_| random_tree(rng, next, depth - 1)).collect();
        if rng.gen_bool(0.5) {
            Decision::And(kids)
        } else {
            Decision::Or(kids)
        }
    }

    #[test]
    fn greedy_sets_pass_the_exhaustive_checker() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let mut n = 0;
            let d = random_tree(&mut rng, &mut n, 3);
            if n > 10 {
                continue;
            }
            let v = derive_condition_variants(&d, n).unwrap();
            assert!(v[0].assignment.iter().all(|&b| b));
            assert!(independence_holds(&d, n, &v), "{d:?}");
            for x in &v[1..] {
                assert!(masked_determining(&d, &x.assignment, x.shows.unwrap()));
            }
        }
    }
}
