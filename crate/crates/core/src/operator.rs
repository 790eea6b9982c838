//! Sparse complex operator algebra over tensor-product Hilbert spaces.
//!
//! Operators are stored in compressed-row form and are immutable after
//! construction. Entries with magnitude below `DROP_TOL * max|entry|` are
//! pruned after every product so that nested commutators of local operators
//! stay sparse. Each operator carries its lattice and the exact set of sites
//! it acts on nontrivially.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative magnitude below which entries are pruned.
pub const DROP_TOL: f64 = 1e-14;
/// Default cap on the total Hilbert-space dimension.
pub const DEFAULT_DIM_CAP: usize = 1 << 20;
/// Dimension cap for dense diagonalization.
pub const DENSE_CAP: usize = 4096;

/// Tensor-product lattice: per-site local Hilbert dimensions.
///
/// Site 0 is the leftmost (most significant) tensor factor. Spin-1/2 sites
/// use basis order (up, down); bosonic sites use occupation order 0..=n_cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpec {
    local_dims: Vec<usize>,
}

impl LatticeSpec {
    pub fn new(local_dims: Vec<usize>) -> Result<Self> {
        Self::with_cap(local_dims, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(local_dims: Vec<usize>, cap: usize) -> Result<Self> {
        if local_dims.is_empty() {
            return Err(Error::InvalidLattice("need at least one site".into()));
        }
        if let Some(&d) = local_dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidLattice(format!(
                "local dimension {d} < 2"
            )));
        }
        let mut dim: usize = 1;
        for &d in &local_dims {
            dim = dim
                .checked_mul(d)
                .ok_or(Error::DimensionCap { dim: usize::MAX, cap })?;
        }
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        Ok(Self { local_dims })
    }

    /// Chain of `l` spin-1/2 sites.
    pub fn spin_chain(l: usize) -> Result<Self> {
        Self::new(vec![2; l])
    }

    /// Chain of `l` bosonic sites with occupation cutoff `n_cut`.
    pub fn boson_chain(l: usize, n_cut: usize) -> Result<Self> {
        Self::new(vec![n_cut + 1; l])
    }

    pub fn num_sites(&self) -> usize {
        self.local_dims.len()
    }

    pub fn local_dim(&self, site: usize) -> usize {
        self.local_dims[site]
    }

    pub fn local_dims(&self) -> &[usize] {
        &self.local_dims
    }

    pub fn total_dim(&self) -> usize {
        self.local_dims.iter().product()
    }

    /// Dimension of all factors strictly before `site`.
    fn prefix_dim(&self, site: usize) -> usize {
        self.local_dims[..site].iter().product()
    }

    /// Dimension of all factors strictly after `site`.
    fn suffix_dim(&self, site: usize) -> usize {
        self.local_dims[site + 1..].iter().product()
    }
}

/// Sparse complex operator on the full many-body Hilbert space.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    lattice: LatticeSpec,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    support: BTreeSet<usize>,
    hermitian: bool,
}

impl SparseOperator {
    /// Build from (row, col, value) triplets. Duplicates are summed, small
    /// entries pruned, support and hermiticity derived from the data.
    pub fn from_triplets(
        lattice: &LatticeSpec,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Self {
        let dim = lattice.total_dim();
        let mut map: HashMap<(usize, usize), Complex64> = HashMap::new();
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            *map.entry((r, c)).or_insert(Complex64::new(0.0, 0.0)) += v;
        }
        let max_abs = map.values().fold(0.0_f64, |m, v| m.max(v.norm()));
        let cut = DROP_TOL * max_abs;
        let mut entries: Vec<(usize, usize, Complex64)> = map
            .into_iter()
            .filter(|(_, v)| v.norm() > cut)
            .map(|((r, c), v)| (r, c, v))
            .collect();
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        for &(r, c, v) in &entries {
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut op = Self {
            lattice: lattice.clone(),
            row_ptr,
            cols,
            vals,
            support: BTreeSet::new(),
            hermitian: false,
        };
        op.support = op.compute_support();
        op.hermitian = op.check_hermitian(1e-12);
        op
    }

    pub fn zero(lattice: &LatticeSpec) -> Self {
        Self::from_triplets(lattice, std::iter::empty())
    }

    pub fn identity(lattice: &LatticeSpec) -> Self {
        let dim = lattice.total_dim();
        Self::from_triplets(lattice, (0..dim).map(|i| (i, i, Complex64::new(1.0, 0.0))))
    }

    pub fn from_dense(lattice: &LatticeSpec, m: &DMatrix<Complex64>) -> Self {
        let dim = lattice.total_dim();
        assert_eq!(m.nrows(), dim);
        assert_eq!(m.ncols(), dim);
        Self::from_triplets(
            lattice,
            (0..dim).flat_map(|r| (0..dim).map(move |c| (r, c, m[(r, c)]))),
        )
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.total_dim()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Sites on which the operator does not factor as identity.
    pub fn support(&self) -> &BTreeSet<usize> {
        &self.support
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        let mut t = Complex64::new(0.0, 0.0);
        for r in 0..self.dim() {
            for (c, v) in self.row(r) {
                if c == r {
                    t += v;
                }
            }
        }
        t
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r)
            .find(|&(cc, _)| cc == c)
            .map(|(_, v)| v)
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= s;
        }
        out.hermitian = out.check_hermitian(1e-12);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dims(other)?;
        Ok(Self::from_triplets(
            &self.lattice,
            self.iter_entries().chain(other.iter_entries()),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            &self.lattice,
            self.iter_entries().map(|(r, c, v)| (c, r, v.conj())),
        )
    }

    /// Sparse-sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dims(other)?;
        let dim = self.dim();
        let mut triplets = Vec::new();
        let mut acc: HashMap<usize, Complex64> = HashMap::new();
        for r in 0..dim {
            acc.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    *acc.entry(c).or_insert(Complex64::new(0.0, 0.0)) += a * b;
                }
            }
            triplets.extend(acc.iter().map(|(&c, &v)| (r, c, v)));
        }
        Ok(Self::from_triplets(&self.lattice, triplets))
    }

    /// `self * m` with dense `m`.
    pub fn mul_dense(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let dim = self.dim();
        assert_eq!(m.nrows(), dim);
        let mut out = DMatrix::zeros(dim, m.ncols());
        for r in 0..dim {
            for (k, a) in self.row(r) {
                for c in 0..m.ncols() {
                    out[(r, c)] += a * m[(k, c)];
                }
            }
        }
        out
    }

    /// `m * self` with dense `m`.
    pub fn dense_mul(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let dim = self.dim();
        assert_eq!(m.ncols(), dim);
        let mut out = DMatrix::zeros(m.nrows(), dim);
        for k in 0..dim {
            for (c, a) in self.row(k) {
                for r in 0..m.nrows() {
                    out[(r, c)] += m[(r, k)] * a;
                }
            }
        }
        out
    }

    /// `self * x` for a state vector.
    pub fn apply_vec(&self, x: &[Complex64], out: &mut [Complex64]) {
        let dim = self.dim();
        debug_assert_eq!(x.len(), dim);
        debug_assert_eq!(out.len(), dim);
        for o in out.iter_mut() {
            *o = Complex64::new(0.0, 0.0);
        }
        for r in 0..dim {
            let mut s = Complex64::new(0.0, 0.0);
            for (c, v) in self.row(r) {
                s += v * x[c];
            }
            out[r] = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for (r, c, v) in self.iter_entries() {
            m[(r, c)] = v;
        }
        m
    }

    fn check_hermitian(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        for (r, c, v) in self.iter_entries() {
            if (v - self.get(c, r).conj()).norm() > tol * scale {
                return false;
            }
        }
        true
    }

    /// Exact support: site j belongs to the support unless the operator
    /// factors as A (x) I_j, i.e. all entries are diagonal in the site-j index
    /// and, for each reduced (row, col) pair, identical for every local value.
    fn compute_support(&self) -> BTreeSet<usize> {
        let mut support = BTreeSet::new();
        if self.vals.is_empty() {
            return support;
        }
        let tol = 1e-12 * self.max_abs();
        'sites: for j in 0..self.lattice.num_sites() {
            let d = self.lattice.local_dim(j);
            let suffix = self.lattice.suffix_dim(j);
            let block = d * suffix;
            let mut groups: HashMap<(usize, usize), (usize, Complex64)> = HashMap::new();
            for (r, c, v) in self.iter_entries() {
                let (ra, rs, rp) = (r / suffix % d, r % suffix, r / block);
                let (ca, cs, cp) = (c / suffix % d, c % suffix, c / block);
                if ra != ca {
                    support.insert(j);
                    continue 'sites;
                }
                let key = (rp * suffix + rs, cp * suffix + cs);
                match groups.get_mut(&key) {
                    None => {
                        groups.insert(key, (1, v));
                    }
                    Some((count, first)) => {
                        if (*first - v).norm() > tol {
                            support.insert(j);
                            continue 'sites;
                        }
                        *count += 1;
                    }
                }
            }
            if groups.values().any(|&(count, _)| count != d) {
                support.insert(j);
            }
        }
        support
    }
}

/// Embed a small dense operator acting on a single site into the full space.
pub fn embed_site_operator(
    lattice: &LatticeSpec,
    site: usize,
    local_op: &DMatrix<Complex64>,
) -> Result<SparseOperator> {
    if site >= lattice.num_sites() {
        return Err(Error::SiteOutOfRange {
            site,
            num_sites: lattice.num_sites(),
        });
    }
    let d = lattice.local_dim(site);
    if local_op.nrows() != d || local_op.ncols() != d {
        return Err(Error::LocalDimMismatch {
            site,
            expected: d,
            got: local_op.nrows(),
        });
    }
    let prefix = lattice.prefix_dim(site);
    let suffix = lattice.suffix_dim(site);
    let mut triplets = Vec::new();
    for a in 0..d {
        for b in 0..d {
            let v = local_op[(a, b)];
            if v.norm() == 0.0 {
                continue;
            }
            for p in 0..prefix {
                for s in 0..suffix {
                    let r = (p * d + a) * suffix + s;
                    let c = (p * d + b) * suffix + s;
                    triplets.push((r, c, v));
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(lattice, triplets))
}

/// `a*b - b*a`.
pub fn commutator(a: &SparseOperator, b: &SparseOperator) -> Result<SparseOperator> {
    a.matmul(b)?.sub(&b.matmul(a)?)
}

/// `[h, x] - eps * x`: one application of the shifted adjoint superoperator.
pub fn shifted_adjoint_apply(
    h: &SparseOperator,
    eps: f64,
    x: &SparseOperator,
) -> Result<SparseOperator> {
    commutator(h, x)?.sub(&x.scale(Complex64::new(eps, 0.0)))
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenCache {
    pub energies: Vec<f64>,
    /// Unitary whose k-th column is the k-th eigenvector.
    pub vectors: DMatrix<Complex64>,
}

impl EigenCache {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }
}

/// Dense diagonalization fallback for oracle use: `h = U diag(E) U^dag`.
pub fn dense_diagonalize(h: &SparseOperator) -> Result<EigenCache> {
    dense_diagonalize_capped(h, DENSE_CAP)
}

pub fn dense_diagonalize_capped(h: &SparseOperator, cap: usize) -> Result<EigenCache> {
    let dim = h.dim();
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    if !h.is_hermitian() {
        let asym = h.sub(&h.adjoint()).map(|d| d.max_abs()).unwrap_or(f64::NAN);
        return Err(Error::NotHermitian { asym });
    }
    let m = h.to_dense();
    let se = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let energies: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (new, &old) in order.iter().enumerate() {
        vectors.set_column(new, &se.eigenvectors.column(old));
    }
    Ok(EigenCache { energies, vectors })
}
