//! Benchmark systems: the boundary-driven XXZ chain and the Bose-Hubbard
//! chain with a trapping potential, together with their bath coupling
//! channels and local on-site eigendecompositions.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bath::{BathSpec, SpectralChannel};
use crate::error::{Error, Result};
use crate::operator::{embed_site_operator, LatticeSpec, SparseOperator};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Single-site spin-1/2 operators in the (up, down) basis.
pub mod pauli {
    use super::*;

    pub fn sx() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    pub fn sy() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    pub fn sz() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    /// sigma^+ = |up><down|
    pub fn sp() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])
    }

    /// sigma^- = |down><up|
    pub fn sm() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)])
    }
}

/// Single-site bosonic operators in the occupation basis 0..dim-1.
pub mod boson {
    use super::*;

    /// a |n> = sqrt(n) |n-1>
    pub fn annihilation(dim: usize) -> DMatrix<Complex64> {
        let mut a = DMatrix::zeros(dim, dim);
        for n in 1..dim {
            a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
        }
        a
    }

    pub fn creation(dim: usize) -> DMatrix<Complex64> {
        annihilation(dim).adjoint()
    }

    pub fn number(dim: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(dim, dim, |r, c_| if r == c_ { c(r as f64, 0.0) } else { c(0.0, 0.0) })
    }
}

/// Boundary-driven XXZ chain, H = -J sum(sx sx + sy sy + Delta sz sz) + sum h_i sz_i
/// with field h_i = h + (i-1) delta_field, i = 1..L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XxzSpec {
    pub l: usize,
    /// Exchange coupling J.
    pub j: f64,
    /// Anisotropy Delta (dimensionless).
    pub delta: f64,
    /// Base field h.
    pub h: f64,
    /// Field gradient delta; h_i = h + (i-1) delta.
    pub delta_field: f64,
}

impl XxzSpec {
    /// Benchmark parameters: Delta = 0.7, delta = -0.07 h.
    pub fn benchmark(l: usize, j: f64) -> Self {
        Self {
            l,
            j,
            delta: 0.7,
            h: 1.0,
            delta_field: -0.07,
        }
    }

    /// Field at 0-based site index.
    pub fn field_at(&self, site: usize) -> f64 {
        self.h + site as f64 * self.delta_field
    }

    fn check_lattice(&self, lattice: &LatticeSpec) -> Result<()> {
        if self.l < 2 {
            return Err(Error::InvalidParameter("XXZ chain needs L >= 2".into()));
        }
        if lattice.num_sites() != self.l || lattice.local_dims().iter().any(|&d| d != 2) {
            return Err(Error::InvalidLattice(format!(
                "XXZ needs {} spin-1/2 sites, lattice has dims {:?}",
                self.l,
                lattice.local_dims()
            )));
        }
        Ok(())
    }

    /// Local on-site term h_i sigma^z as a 2x2 matrix (0-based site).
    pub fn local_hamiltonian(&self, site: usize) -> DMatrix<Complex64> {
        pauli::sz() * c(self.field_at(site), 0.0)
    }
}

pub fn build_xxz(spec: &XxzSpec, lattice: &LatticeSpec) -> Result<SparseOperator> {
    spec.check_lattice(lattice)?;
    let mut h = SparseOperator::zero(lattice);
    for i in 0..spec.l - 1 {
        h = h.add(&xxz_bond_term(spec, lattice, i)?)?;
    }
    for i in 0..spec.l {
        let term = embed_site_operator(lattice, i, &spec.local_hamiltonian(i))?;
        h = h.add(&term)?;
    }
    Ok(h)
}

/// The nearest-neighbor interaction term -J (sx sx + sy sy + Delta sz sz)
/// at bond (i, i+1); excludes the on-site field.
pub fn xxz_bond_term(spec: &XxzSpec, lattice: &LatticeSpec, i: usize) -> Result<SparseOperator> {
    spec.check_lattice(lattice)?;
    if i + 1 >= spec.l {
        return Err(Error::SiteOutOfRange {
            site: i + 1,
            num_sites: spec.l,
        });
    }
    let pair = |m: &DMatrix<Complex64>| -> Result<SparseOperator> {
        embed_site_operator(lattice, i, m)?.matmul(&embed_site_operator(lattice, i + 1, m)?)
    };
    let xx = pair(&pauli::sx())?;
    let yy = pair(&pauli::sy())?;
    let zz = pair(&pauli::sz())?;
    let iso = xx.add(&yy)?.add(&zz.scale(c(spec.delta, 0.0)))?;
    Ok(iso.scale(c(-spec.j, 0.0)))
}

/// Bose-Hubbard chain with trap,
/// H = -J sum(a^dag_{i+1} a_i + h.c.) + sum [U/2 n(n+1) + V_i n].
#[derive(Debug, Clone, PartialEq)]
pub struct BoseHubbardSpec {
    pub l: usize,
    /// Hopping J.
    pub j: f64,
    /// On-site interaction U.
    pub u: f64,
    /// Trap potential per site (1-based formula V_i = 0.35 (i - L/2)^2 J).
    pub trap: Vec<f64>,
    /// Per-site occupation cutoff n_i <= n_cut.
    pub n_cut: usize,
}

impl BoseHubbardSpec {
    /// Benchmark parameters: U = 0.5 J, V_i = 0.35 (i - L/2)^2 J, n_cut = 2.
    pub fn benchmark(l: usize, j: f64) -> Self {
        Self {
            l,
            j,
            u: 0.5 * j,
            trap: Self::benchmark_trap(l, j),
            n_cut: 2,
        }
    }

    pub fn benchmark_trap(l: usize, j: f64) -> Vec<f64> {
        (1..=l)
            .map(|i| 0.35 * (i as f64 - l as f64 / 2.0).powi(2) * j)
            .collect()
    }

    fn check_lattice(&self, lattice: &LatticeSpec) -> Result<()> {
        if self.n_cut < 1 {
            return Err(Error::InvalidParameter("n_cut must be >= 1".into()));
        }
        if self.trap.len() != self.l {
            return Err(Error::InvalidParameter(format!(
                "trap has {} entries for {} sites",
                self.trap.len(),
                self.l
            )));
        }
        let d = self.n_cut + 1;
        if lattice.num_sites() != self.l || lattice.local_dims().iter().any(|&x| x != d) {
            return Err(Error::InvalidLattice(format!(
                "Bose-Hubbard needs {} sites of dimension {}, lattice has {:?}",
                self.l,
                d,
                lattice.local_dims()
            )));
        }
        Ok(())
    }

    /// Local on-site term U/2 n(n+1) + V_i n as a diagonal matrix (0-based site).
    pub fn local_hamiltonian(&self, site: usize) -> DMatrix<Complex64> {
        let d = self.n_cut + 1;
        DMatrix::from_fn(d, d, |r, col| {
            if r == col {
                let n = r as f64;
                c(0.5 * self.u * n * (n + 1.0) + self.trap[site] * n, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
    }
}

pub fn build_bose_hubbard(spec: &BoseHubbardSpec, lattice: &LatticeSpec) -> Result<SparseOperator> {
    spec.check_lattice(lattice)?;
    let d = spec.n_cut + 1;
    let a = boson::annihilation(d);
    let adag = boson::creation(d);
    let mut h = SparseOperator::zero(lattice);
    for i in 0..spec.l - 1 {
        let hop = embed_site_operator(lattice, i + 1, &adag)?
            .matmul(&embed_site_operator(lattice, i, &a)?)?;
        let term = hop.add(&hop.adjoint())?.scale(c(-spec.j, 0.0));
        h = h.add(&term)?;
    }
    for i in 0..spec.l {
        h = h.add(&embed_site_operator(lattice, i, &spec.local_hamiltonian(i))?)?;
    }
    Ok(h)
}

/// Total particle number sum_i n_i.
pub fn total_number(lattice: &LatticeSpec) -> Result<SparseOperator> {
    let mut n = SparseOperator::zero(lattice);
    for i in 0..lattice.num_sites() {
        n = n.add(&embed_site_operator(
            lattice,
            i,
            &boson::number(lattice.local_dim(i)),
        )?)?;
    }
    Ok(n)
}

/// One term of the spectral decomposition of a site-local operator with
/// respect to the local on-site eigenbasis, embedded in the full space.
/// Pieces with degenerate local transition energy are merged.
#[derive(Debug, Clone)]
pub struct DecompPiece {
    pub op: SparseOperator,
    /// Local transition energy eps_kq = E_k^loc - E_q^loc.
    pub eps: f64,
    /// Per contributing (k, q) pair: matrix element <k|v|q> and the local
    /// energy E_q^loc; used for thermal weights.
    pub weights: Vec<(Complex64, f64)>,
}

/// Spectral decomposition of a local operator in the eigenbasis of the
/// site Hamiltonian: v = sum_kq |k><k| v |q><q|, each piece tagged with its
/// local transition energy.
pub fn local_decompose(
    lattice: &LatticeSpec,
    site: usize,
    local_op: &DMatrix<Complex64>,
    site_hamiltonian: &DMatrix<Complex64>,
) -> Result<Vec<DecompPiece>> {
    let d = lattice.local_dim(site);
    if local_op.nrows() != d || site_hamiltonian.nrows() != d {
        return Err(Error::LocalDimMismatch {
            site,
            expected: d,
            got: local_op.nrows(),
        });
    }
    let asym = (site_hamiltonian - site_hamiltonian.adjoint()).norm();
    if asym > 1e-12 * site_hamiltonian.norm().max(1.0) {
        return Err(Error::NotHermitian { asym });
    }
    let se = site_hamiltonian.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let energies: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vecs: Vec<nalgebra::DVector<Complex64>> = order
        .iter()
        .map(|&k| se.eigenvectors.column(k).into_owned())
        .collect();

    let scale = local_op.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    // Collect raw (eps, local piece matrix, weight) terms.
    let mut raw: Vec<(f64, DMatrix<Complex64>, Complex64, f64)> = Vec::new();
    for k in 0..d {
        for q in 0..d {
            let matelem = (vecs[k].adjoint() * local_op * &vecs[q])[(0, 0)];
            if matelem.norm() < 1e-14 * scale {
                continue;
            }
            let piece = &vecs[k] * vecs[q].adjoint() * matelem;
            raw.push((energies[k] - energies[q], piece, matelem, energies[q]));
        }
    }
    // Merge degenerate transition energies.
    let mut merged: Vec<(f64, DMatrix<Complex64>, Vec<(Complex64, f64)>)> = Vec::new();
    for (eps, piece, matelem, e_q) in raw {
        match merged
            .iter_mut()
            .find(|(e, _, _)| (eps - *e).abs() < 1e-12 * eps.abs().max(1.0))
        {
            Some((_, acc, weights)) => {
                *acc += piece;
                weights.push((matelem, e_q));
            }
            None => merged.push((eps, piece, vec![(matelem, e_q)])),
        }
    }
    merged
        .into_iter()
        .map(|(eps, m, weights)| {
            Ok(DecompPiece {
                op: embed_site_operator(lattice, site, &m)?,
                eps,
                weights,
            })
        })
        .collect()
}

/// Variant of [`local_decompose`] that takes the embedded operator and
/// checks it is indeed site-local.
pub fn local_decompose_op(
    v: &SparseOperator,
    site: usize,
    site_hamiltonian: &DMatrix<Complex64>,
) -> Result<Vec<DecompPiece>> {
    let local = extract_local_matrix(v, site)?;
    local_decompose(v.lattice(), site, &local, site_hamiltonian)
}

/// Recover the local d x d matrix of an operator supported on one site.
pub fn extract_local_matrix(v: &SparseOperator, site: usize) -> Result<DMatrix<Complex64>> {
    if !v.support().iter().all(|&s| s == site) {
        return Err(Error::NotSiteLocal {
            support: v.support().iter().copied().collect(),
            site,
        });
    }
    let lattice = v.lattice();
    let d = lattice.local_dim(site);
    let suffix: usize = lattice.local_dims()[site + 1..].iter().product();
    let local = DMatrix::from_fn(d, d, |a, b| v.get(a * suffix, b * suffix));
    // The support check plus one re-embedding comparison pins this down.
    let re = embed_site_operator(lattice, site, &local)?;
    if re.sub(v)?.max_abs() > 1e-12 * v.max_abs().max(1e-300) {
        return Err(Error::NotSiteLocal {
            support: v.support().iter().copied().collect(),
            site,
        });
    }
    Ok(local)
}

/// A single system-bath coupling channel: the Redfield dissipator term
/// [u rho, v] + h.c. built from the expansion source operator, its local
/// spectral decomposition and the bath spectral function.
#[derive(Debug, Clone)]
pub struct CouplingChannel {
    pub site: usize,
    /// Operator appearing in the commutator [u rho, v].
    pub v: SparseOperator,
    /// Operator fed into the correlation-time expansion of u. Equals `v`
    /// for a product coupling; for the reservoir pair it is the conjugate
    /// partner (u_1 is built from a^dag while v_1 = a).
    pub u_source: SparseOperator,
    pub bath: BathSpec,
    pub channel: SpectralChannel,
    /// Local spectral decomposition of `u_source`.
    pub pieces: Vec<DecompPiece>,
    /// Eigenvalues of the local site Hamiltonian, ascending.
    pub local_energies: Vec<f64>,
}

impl CouplingChannel {
    pub fn new(
        lattice: &LatticeSpec,
        site: usize,
        local_v: &DMatrix<Complex64>,
        local_u_source: &DMatrix<Complex64>,
        site_hamiltonian: &DMatrix<Complex64>,
        bath: BathSpec,
        channel: SpectralChannel,
    ) -> Result<Self> {
        let v = embed_site_operator(lattice, site, local_v)?;
        let u_source = embed_site_operator(lattice, site, local_u_source)?;
        let pieces = local_decompose(lattice, site, local_u_source, site_hamiltonian)?;
        let se = site_hamiltonian.clone().symmetric_eigen();
        let mut local_energies: Vec<f64> = se.eigenvalues.iter().copied().collect();
        local_energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self {
            site,
            v,
            u_source,
            bath,
            channel,
            pieces,
            local_energies,
        })
    }

    /// Ohmic/Drude channel of the XXZ chain: v = sigma^x at a boundary site.
    pub fn xxz_boundary(
        lattice: &LatticeSpec,
        spec: &XxzSpec,
        site: usize,
        bath: BathSpec,
    ) -> Result<Self> {
        Self::new(
            lattice,
            site,
            &pauli::sx(),
            &pauli::sx(),
            &spec.local_hamiltonian(site),
            bath,
            SpectralChannel::Standard,
        )
    }

    /// The two Redfield channels of the Bose-Hubbard particle reservoir at
    /// site 0: (v = a, u from a^dag, W_1) and (v = a^dag, u from a, W_2).
    pub fn bose_hubbard_reservoir(
        lattice: &LatticeSpec,
        spec: &BoseHubbardSpec,
        bath: BathSpec,
    ) -> Result<Vec<Self>> {
        let d = spec.n_cut + 1;
        let a = boson::annihilation(d);
        let adag = boson::creation(d);
        let h_loc = spec.local_hamiltonian(0);
        Ok(vec![
            Self::new(lattice, 0, &a, &adag, &h_loc, bath, SpectralChannel::Absorb)?,
            Self::new(lattice, 0, &adag, &a, &h_loc, bath, SpectralChannel::Emit)?,
        ])
    }

    /// Sum of the decomposition pieces; must reproduce `u_source` exactly.
    pub fn reconstruct(&self) -> Result<SparseOperator> {
        let mut acc = SparseOperator::zero(self.u_source.lattice());
        for p in &self.pieces {
            acc = acc.add(&p.op)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{commutator, dense_diagonalize};

    #[test]
    fn xxz_decoupled_limit() {
        // J = 0: H = h1 sz_1 + h2 sz_2, eigenvalues {+-h1 +-h2}.
        let spec = XxzSpec {
            l: 2,
            j: 0.0,
            delta: 0.7,
            h: 1.0,
            delta_field: 0.3,
        };
        let lat = LatticeSpec::spin_chain(2).unwrap();
        let h = build_xxz(&spec, &lat).unwrap();
        let eig = dense_diagonalize(&h).unwrap();
        let (h1, h2) = (1.0, 1.3);
        let mut expect = vec![h1 + h2, h1 - h2, -h1 + h2, -h1 - h2];
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (e, x) in eig.energies.iter().zip(expect) {
            assert!((e - x).abs() < 1e-12);
        }
    }

    #[test]
    fn xxz_paper_hamiltonian_is_traceless() {
        let spec = XxzSpec::benchmark(6, 1.0);
        let lat = LatticeSpec::spin_chain(6).unwrap();
        let h = build_xxz(&spec, &lat).unwrap();
        assert!(h.trace().norm() < 1e-12);
        assert!(h.is_hermitian());
    }

    #[test]
    fn xxz_conserves_total_magnetization() {
        let spec = XxzSpec {
            l: 4,
            j: 1.0,
            delta: 0.7,
            h: 1.0,
            delta_field: 0.0,
        };
        let lat = LatticeSpec::spin_chain(4).unwrap();
        let h = build_xxz(&spec, &lat).unwrap();
        let mut sz_tot = SparseOperator::zero(&lat);
        for i in 0..4 {
            sz_tot = sz_tot
                .add(&embed_site_operator(&lat, i, &pauli::sz()).unwrap())
                .unwrap();
        }
        assert!(commutator(&h, &sz_tot).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn xxz_bond_term_support() {
        let spec = XxzSpec::benchmark(5, 1.0);
        let lat = LatticeSpec::spin_chain(5).unwrap();
        let bond = xxz_bond_term(&spec, &lat, 2).unwrap();
        assert_eq!(
            bond.support().iter().copied().collect::<Vec<_>>(),
            vec![2, 3]
        );
    }

    #[test]
    fn bose_hubbard_single_site_energies() {
        // E_n = U/2 n(n+1) + V n; for n = 1 this is U + V_1.
        let spec = BoseHubbardSpec {
            l: 1,
            j: 0.0,
            u: 0.5,
            trap: vec![0.3],
            n_cut: 2,
        };
        let h_loc = spec.local_hamiltonian(0);
        assert!((h_loc[(1, 1)].re - (0.5 + 0.3)).abs() < 1e-15);
        assert!((h_loc[(2, 2)].re - (0.5 / 2.0 * 6.0 + 0.6)).abs() < 1e-15);
    }

    #[test]
    fn bose_hubbard_hopping_doublet() {
        // U = 0, V = 0, L = 2, n_cut = 1: one-particle sector splits to +-J.
        let spec = BoseHubbardSpec {
            l: 2,
            j: 1.0,
            u: 0.0,
            trap: vec![0.0, 0.0],
            n_cut: 1,
        };
        let lat = LatticeSpec::boson_chain(2, 1).unwrap();
        let h = build_bose_hubbard(&spec, &lat).unwrap();
        let eig = dense_diagonalize(&h).unwrap();
        // Basis: |00>, |01>, |10>, |11>; spectrum {-J, 0, 0, +J}.
        let expect = [-1.0, 0.0, 0.0, 1.0];
        for (e, x) in eig.energies.iter().zip(expect) {
            assert!((e - x).abs() < 1e-12);
        }
    }

    #[test]
    fn bose_hubbard_conserves_particle_number() {
        let spec = BoseHubbardSpec::benchmark(4, 1.0);
        let lat = LatticeSpec::boson_chain(4, 2).unwrap();
        let h = build_bose_hubbard(&spec, &lat).unwrap();
        let n = total_number(&lat).unwrap();
        assert!(commutator(&h, &n).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn decompose_sigma_x_against_field() {
        // v = sigma^x, H_loc = h1 sigma^z: pieces sigma^- at -2h1 and
        // sigma^+ at +2h1.
        let h1 = 0.8;
        let lat = LatticeSpec::spin_chain(1).unwrap();
        let h_loc = pauli::sz() * c(h1, 0.0);
        let pieces = local_decompose(&lat, 0, &pauli::sx(), &h_loc).unwrap();
        assert_eq!(pieces.len(), 2);
        let minus = pieces
            .iter()
            .find(|p| (p.eps + 2.0 * h1).abs() < 1e-12)
            .expect("sigma^- piece");
        let sm = embed_site_operator(&lat, 0, &pauli::sm()).unwrap();
        assert!(minus.op.sub(&sm).unwrap().max_abs() < 1e-13);
        let plus = pieces
            .iter()
            .find(|p| (p.eps - 2.0 * h1).abs() < 1e-12)
            .expect("sigma^+ piece");
        let sp = embed_site_operator(&lat, 0, &pauli::sp()).unwrap();
        assert!(plus.op.sub(&sp).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn decompose_annihilation_on_bose_site() {
        // (a)_{n-1,n} carries eps^-_n = E_{n-1} - E_n = -U n - V_1
        // for the local energies E_n = U/2 n(n+1) + V_1 n.
        let spec = BoseHubbardSpec {
            l: 1,
            j: 0.0,
            u: 0.5,
            trap: vec![0.2],
            n_cut: 2,
        };
        let lat = LatticeSpec::boson_chain(1, 2).unwrap();
        let pieces = local_decompose(
            &lat,
            0,
            &boson::annihilation(3),
            &spec.local_hamiltonian(0),
        )
        .unwrap();
        assert_eq!(pieces.len(), 2);
        for n in 1..=2usize {
            let eps = -spec.u * n as f64 - spec.trap[0];
            assert!(
                pieces.iter().any(|p| (p.eps - eps).abs() < 1e-12),
                "missing eps^-_{n} = {eps}"
            );
        }
    }

    #[test]
    fn decompose_commuting_operator_single_piece() {
        let lat = LatticeSpec::spin_chain(1).unwrap();
        let h_loc = pauli::sz() * c(0.5, 0.0);
        let pieces = local_decompose(&lat, 0, &pauli::sz(), &h_loc).unwrap();
        assert_eq!(pieces.len(), 1);
        assert!(pieces[0].eps.abs() < 1e-12);
    }

    #[test]
    fn decomposition_reconstructs_operator() {
        let lat = LatticeSpec::spin_chain(3).unwrap();
        let spec = XxzSpec::benchmark(3, 1.0);
        let bath = BathSpec::ohmic(0.25, 2.2).unwrap();
        for site in [0, 2] {
            let ch = CouplingChannel::xxz_boundary(&lat, &spec, site, bath).unwrap();
            let diff = ch.reconstruct().unwrap().sub(&ch.u_source).unwrap();
            assert!(diff.max_abs() < 1e-14);
        }
        let bspec = BoseHubbardSpec::benchmark(2, 1.0);
        let blat = LatticeSpec::boson_chain(2, 2).unwrap();
        let rbath = BathSpec::reservoir(0.25, 2.0, -5.0).unwrap();
        for ch in CouplingChannel::bose_hubbard_reservoir(&blat, &bspec, rbath).unwrap() {
            let diff = ch.reconstruct().unwrap().sub(&ch.u_source).unwrap();
            assert!(diff.max_abs() < 1e-14);
        }
    }

    #[test]
    fn transition_energies_are_local_eigendifferences() {
        let bspec = BoseHubbardSpec::benchmark(2, 1.0);
        let blat = LatticeSpec::boson_chain(2, 2).unwrap();
        let rbath = BathSpec::reservoir(0.25, 2.0, -5.0).unwrap();
        for ch in CouplingChannel::bose_hubbard_reservoir(&blat, &bspec, rbath).unwrap() {
            for p in &ch.pieces {
                let ok = ch.local_energies.iter().any(|&ek| {
                    ch.local_energies
                        .iter()
                        .any(|&eq| (p.eps - (ek - eq)).abs() < 1e-11)
                });
                assert!(ok, "eps {} not an eigendifference", p.eps);
            }
        }
    }

    #[test]
    fn local_decompose_rejects_nonlocal_operator() {
        let lat = LatticeSpec::spin_chain(2).unwrap();
        let nonlocal = embed_site_operator(&lat, 0, &pauli::sx())
            .unwrap()
            .matmul(&embed_site_operator(&lat, 1, &pauli::sx()).unwrap())
            .unwrap();
        assert!(matches!(
            local_decompose_op(&nonlocal, 0, &pauli::sz()),
            Err(Error::NotSiteLocal { .. })
        ));
    }
}
