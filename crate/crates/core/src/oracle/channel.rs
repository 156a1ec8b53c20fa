use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64 as C64;

use super::density::{checked_dim, decode, encode, FockDensity};
use super::OracleError;
use crate::diffraction::{dilate, ModeMap};

/// Weight that may be lost to output occupations beyond the cutoff before
/// the channel reports an overflow.
pub const OVERFLOW_TOL: f64 = 1e-12;

type Occupation = Vec<u16>;

// Π_j (Σ_i U_ij b_i†)^{e_j} / √(e_j!) |0⟩ as a sparse map over output
// occupations. Only the first `e.len()` columns of `u` are used.
fn expand_creation(u: &DMatrix<C64>, e: &[usize]) -> BTreeMap<Occupation, C64> {
    let n_out = u.nrows();
    let mut state: BTreeMap<Occupation, C64> = BTreeMap::new();
    state.insert(vec![0; n_out], C64::new(1.0, 0.0));
    for (j, &count) in e.iter().enumerate() {
        for photon in 1..=count {
            let mut next: BTreeMap<Occupation, C64> = BTreeMap::new();
            for (occ, amp) in &state {
                for i in 0..n_out {
                    let coupling = u[(i, j)];
                    if coupling == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let mut raised = occ.clone();
                    raised[i] += 1;
                    let factor = (raised[i] as f64).sqrt() / (photon as f64).sqrt();
                    *next.entry(raised).or_default() += amp * coupling * factor;
                }
            }
            state = next;
        }
    }
    state
}

/// Sends the first `M.ncols()` modes of `ρ` through the contraction `M`
/// (lossy linear-optical map) and keeps the remaining modes untouched.
///
/// The channel is realized by the dilation of `M` with vacuum ancillas,
/// the substitution `a_j† → Σ_i U_ij b_i†` on every basis state, and a
/// partial trace over the ancilla outputs. Output modes are ordered as the
/// rows of `M` followed by the untouched modes, at the input cutoff.
pub fn apply_contraction(rho: &FockDensity, m: &DMatrix<C64>) -> Result<FockDensity, OracleError> {
    let (retained, incident) = m.shape();
    if incident > rho.modes() {
        return Err(OracleError::ModeOutOfRange(incident));
    }
    let u = dilate(m)?;
    assemble(rho, retained, incident, |inc| expand_creation(&u, inc))
}

// Builds `Σ_a K_a ρ K_a†` from the image of each incident occupation under
// the dilated unitary, then checks how much weight left the cutoff.
fn assemble<E>(rho: &FockDensity, retained: usize, incident: usize, mut expand: E) -> Result<FockDensity, OracleError>
where
    E: FnMut(&[usize]) -> BTreeMap<Occupation, C64>,
{
    let d = rho.cutoff();
    let out_modes = retained + rho.modes() - incident;
    let out_dim = checked_dim(out_modes, d)?;

    // Kraus operators keyed by the ancilla occupation, as sparse (out, in, amp).
    let mut kraus: Vec<Vec<(usize, usize, C64)>> = Vec::new();
    let mut ancilla_slot: HashMap<Occupation, usize> = HashMap::new();
    let mut expansions: HashMap<Vec<usize>, BTreeMap<Occupation, C64>> = HashMap::new();
    for s in 0..rho.dim() {
        let occ = rho.occupation(s);
        let (inc, pass) = occ.split_at(incident);
        let expansion = expansions.entry(inc.to_vec()).or_insert_with(|| expand(inc));
        for (out_occ, amp) in expansion.iter() {
            let (kept, ancilla) = out_occ.split_at(retained);
            if kept.iter().any(|&n| n as usize >= d) {
                continue;
            }
            let mut full: Vec<usize> = kept.iter().map(|&n| n as usize).collect();
            full.extend_from_slice(pass);
            let slot = *ancilla_slot.entry(ancilla.to_vec()).or_insert_with(|| {
                kraus.push(Vec::new());
                kraus.len() - 1
            });
            kraus[slot].push((encode(&full, d), s, *amp));
        }
    }

    let mut out = DMatrix::<C64>::zeros(out_dim, out_dim);
    let source = rho.matrix();
    for terms in &kraus {
        for &(a, e, ka) in terms {
            for &(b, f, kb) in terms {
                let r = source[(e, f)];
                if r != C64::new(0.0, 0.0) {
                    out[(a, b)] += ka * r * kb.conj();
                }
            }
        }
    }
    let result = FockDensity::new(out_modes, d, out, rho.tail_defect())?;
    let lost = rho.trace() - result.trace();
    if lost > OVERFLOW_TOL {
        return Err(OracleError::CutoffOverflow { weight: lost, cutoff: d });
    }
    Ok(result)
}

/// Applies a mode map restricted to its retained rows. The first
/// `map.incident_modes().len()` modes of `ρ` are the incident modes, in the
/// map's column order.
pub fn apply_linear_channel(rho: &FockDensity, map: &ModeMap) -> Result<FockDensity, OracleError> {
    apply_contraction(rho, map.entries())
}

/// Principal logarithm of a unitary through its complex Schur form.
pub fn unitary_log(u: &DMatrix<C64>) -> DMatrix<C64> {
    let (q, t) = Schur::new(u.clone()).unpack();
    let diag = DMatrix::from_diagonal(&t.diagonal().map(|z| C64::new(0.0, z.arg())));
    &q * diag * q.adjoint()
}

/// Fock-space representation of the linear-optical unitary `U` on
/// `U.nrows()` modes at the given cutoff, built as `exp(Σ_ij A_ij b_i† b_j)`
/// with `A = log U`. Exact on states whose total photon number is below
/// the cutoff.
pub fn fock_unitary_by_generator(u: &DMatrix<C64>, cutoff: usize) -> Result<DMatrix<C64>, OracleError> {
    let n = u.nrows();
    let dim = checked_dim(n, cutoff)?;
    let a = unitary_log(u);
    let mut g = DMatrix::<C64>::zeros(dim, dim);
    for s in 0..dim {
        let occ = decode(s, n, cutoff);
        for j in 0..n {
            if occ[j] == 0 {
                continue;
            }
            for i in 0..n {
                let mut next = occ.clone();
                let mut amp = (next[j] as f64).sqrt();
                next[j] -= 1;
                next[i] += 1;
                if next[i] >= cutoff {
                    continue;
                }
                amp *= (next[i] as f64).sqrt();
                g[(encode(&next, cutoff), s)] += a[(i, j)] * amp;
            }
        }
    }
    Ok(g.exp())
}

// `exp(Σ_ij A_ij b_i† b_j)` restricted to the states with `n` photons in
// total, which the generator leaves invariant.
struct Sector {
    basis: Vec<Occupation>,
    lookup: HashMap<Occupation, usize>,
    unitary: DMatrix<C64>,
}

fn compositions(total: usize, parts: usize) -> Vec<Occupation> {
    if parts == 1 {
        return vec![vec![total as u16]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first as u16);
            out.push(rest);
        }
    }
    out
}

impl Sector {
    fn new(log_u: &DMatrix<C64>, photons: usize) -> Self {
        let n = log_u.nrows();
        let basis = compositions(photons, n);
        let lookup: HashMap<Occupation, usize> = basis.iter().cloned().enumerate().map(|(i, o)| (o, i)).collect();
        let mut g = DMatrix::<C64>::zeros(basis.len(), basis.len());
        for (s, occ) in basis.iter().enumerate() {
            for j in (0..n).filter(|&j| occ[j] > 0) {
                for i in 0..n {
                    let mut next = occ.clone();
                    let mut amp = (next[j] as f64).sqrt();
                    next[j] -= 1;
                    next[i] += 1;
                    amp *= (next[i] as f64).sqrt();
                    g[(lookup[&next], s)] += log_u[(i, j)] * amp;
                }
            }
        }
        Self { basis, lookup, unitary: g.exp() }
    }

    fn image(&self, occ: &Occupation) -> BTreeMap<Occupation, C64> {
        let col = self.lookup[occ];
        self.basis
            .iter()
            .enumerate()
            .map(|(r, o)| (o.clone(), self.unitary[(r, col)]))
            .filter(|(_, amp)| *amp != C64::new(0.0, 0.0))
            .collect()
    }
}

/// Second route to [`apply_contraction`]. The dilated unitary acts on each
/// total-photon-number sector as the exponential of its lifted generator
/// `Σ_ij (log U)_ij b_i† b_j`; the cutoff enters only when the output is
/// truncated, exactly as in the substitution route.
pub fn apply_contraction_by_generator(rho: &FockDensity, m: &DMatrix<C64>) -> Result<FockDensity, OracleError> {
    let (retained, incident) = m.shape();
    if incident > rho.modes() {
        return Err(OracleError::ModeOutOfRange(incident));
    }
    let log_u = unitary_log(&dilate(m)?);
    let width = log_u.nrows();
    let mut sectors: HashMap<usize, Sector> = HashMap::new();
    assemble(rho, retained, incident, |inc| {
        let photons: usize = inc.iter().sum();
        let sector = sectors.entry(photons).or_insert_with(|| Sector::new(&log_u, photons));
        let mut occ: Occupation = inc.iter().map(|&k| k as u16).collect();
        occ.resize(width, 0);
        sector.image(&occ)
    })
}

/// Reorders modes so that new mode `i` is old mode `order[i]`.
pub fn permute_modes(rho: &FockDensity, order: &[usize]) -> Result<FockDensity, OracleError> {
    rho.partial_trace(order).and_then(|p| {
        if order.len() == rho.modes() {
            Ok(p)
        } else {
            Err(OracleError::ModeOutOfRange(order.len()))
        }
    })
}
