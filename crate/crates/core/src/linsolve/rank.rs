use super::sparse::CsrMatrix;

const P: u64 = 2_147_483_647;

fn inv(a: u64) -> u64 {
    let (mut r, mut b, mut e) = (1u64, a % P, P - 2);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % P;
        }
        b = b * b % P;
        e >>= 1;
    }
    r
}

fn to_field(v: f64) -> u64 {
    let i = v.round() as i64;
    debug_assert_eq!(i as f64, v, "rank_mod_p needs integer entries");
    i.rem_euclid(P as i64) as u64
}

/// Rank of an integer matrix over the prime field `Z/(2³¹-1)`.
///
/// Incidence matrices of simplicial complexes embedded in space have no
/// torsion in practice, so this equals the rational rank. Rows are reduced
/// one at a time against a sparse echelon basis.
pub fn rank_mod_p(m: &CsrMatrix) -> usize {
    let mut pivots: Vec<Option<Vec<(usize, u64)>>> = vec![None; m.ncols()];
    let mut rank = 0;
    let mut scratch = Vec::new();
    for i in 0..m.nrows() {
        let mut row: Vec<(usize, u64)> = m
            .row(i)
            .map(|(j, v)| (j, to_field(v)))
            .filter(|&(_, v)| v != 0)
            .collect();
        while let Some(&(lead, coef)) = row.first() {
            match &pivots[lead] {
                Some(p) => {
                    // row -= coef * p, where p has leading coefficient 1
                    scratch.clear();
                    let (mut a, mut b) = (0, 0);
                    while a < row.len() || b < p.len() {
                        let ja = row.get(a).map_or(usize::MAX, |x| x.0);
                        let jb = p.get(b).map_or(usize::MAX, |x| x.0);
                        let (j, val) = if ja < jb {
                            a += 1;
                            (ja, row[a - 1].1)
                        } else if jb < ja {
                            b += 1;
                            (jb, (P - coef * p[b - 1].1 % P) % P)
                        } else {
                            a += 1;
                            b += 1;
                            (ja, (row[a - 1].1 + P - coef * p[b - 1].1 % P) % P)
                        };
                        if val != 0 {
                            scratch.push((j, val));
                        }
                    }
                    std::mem::swap(&mut row, &mut scratch);
                }
                None => {
                    let s = inv(coef);
                    row.iter_mut().for_each(|x| x.1 = x.1 * s % P);
                    pivots[lead] = Some(row);
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}
