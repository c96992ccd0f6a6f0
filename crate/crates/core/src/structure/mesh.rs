use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::structure::operator::{GroupBlock, GroupLinearOperator};

/// Singular values below this fraction of the largest are treated as zero
/// when ranking a vertex's edge matrix.
const RANK_TOL: f64 = 1e-12;

/// A triangle surface mesh. Adjacency is derived from the triangles and is
/// symmetric by construction.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references a vertex outside 0..{nv}"
                )));
            }
            if tri[0] == tri[1] || tri[0] == tri[2] || tri[1] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Sorted, deduplicated neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for tri in &self.triangles {
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                adj[tri[a]].push(tri[b]);
                adj[tri[b]].push(tri[a]);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Builds the mesh TV operator. Each vertex `g` gets up to 3 rows estimating
/// the spatial gradient of a per-vertex field from `g` and its neighbors: the
/// best least-squares linear fit over the edge vectors. When the edge matrix
/// has rank r < 3 the group keeps r rows with the same ℓ2 norm as the
/// least-squares gradient, so the TV penalty is unchanged. Isolated vertices
/// contribute no rows.
pub fn build_mesh_tv_operator<T: Real>(mesh: &TriangleMesh) -> Result<GroupLinearOperator<T>> {
    let p = mesh.vertex_count();
    if p == 0 {
        return Err(Error::EmptyMask);
    }
    let adj = mesh.adjacency();
    let xs = mesh.vertices();
    let mut groups = Vec::with_capacity(p);
    for g in 0..p {
        let nbrs = &adj[g];
        let d = nbrs.len();
        if d == 0 {
            groups.push(GroupBlock::new(vec![g], vec![], 0));
            continue;
        }
        // Edge matrix E (d×3): row h = x_h − x_g.
        let e: Vec<[f64; 3]> = nbrs
            .iter()
            .map(|&h| {
                [
                    xs[h][0] - xs[g][0],
                    xs[h][1] - xs[g][1],
                    xs[h][2] - xs[g][2],
                ]
            })
            .collect();
        // C = EᵀE, then C = Q Λ Qᵀ with eigenvalues descending.
        let mut c = [[0.0; 3]; 3];
        for row in &e {
            for a in 0..3 {
                for b in 0..3 {
                    c[a][b] += row[a] * row[b];
                }
            }
        }
        let (lam, q) = sym_eigen_3(c);
        let lam_max = lam[0].max(0.0);
        let rank = lam
            .iter()
            .take_while(|&&l| l > lam_max * RANK_TOL && l > 0.0)
            .count();
        if rank == 0 {
            groups.push(GroupBlock::new(vec![g], vec![], 0));
            continue;
        }
        // Core map on edge differences: G = Λ_r⁻¹ Q_rᵀ Eᵀ (r×d). With full
        // rank, premultiplying by Q gives the literal pseudo-inverse E⁺,
        // whose rows are the gradient weights.
        let mut core = vec![vec![0.0; d]; rank];
        for (r, row) in core.iter_mut().enumerate() {
            for (h, edge) in e.iter().enumerate() {
                let qe: f64 = (0..3).map(|a| q[a][r] * edge[a]).sum();
                row[h] = qe / lam[r];
            }
        }
        let rows_f64: Vec<Vec<f64>> = if rank == 3 {
            (0..3)
                .map(|a| {
                    (0..d)
                        .map(|h| (0..3).map(|r| q[a][r] * core[r][h]).sum())
                        .collect()
                })
                .collect()
        } else {
            core
        };
        // Map weights on (v_h − v_g) onto columns (g, neighbors).
        let mut cols = Vec::with_capacity(d + 1);
        cols.push(g);
        cols.extend_from_slice(nbrs);
        let mut data = Vec::with_capacity(rows_f64.len() * cols.len());
        for row in &rows_f64 {
            let at_g: f64 = -row.iter().sum::<f64>();
            data.push(T::of(at_g));
            data.extend(row.iter().map(|&w| T::of(w)));
        }
        let nrows = rows_f64.len();
        groups.push(GroupBlock::new(cols, data, nrows));
    }
    GroupLinearOperator::from_groups(p, groups)
}

/// Eigendecomposition of a symmetric 3×3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns of `q` (`q[row][col]`).
fn sym_eigen_3(a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut a = a;
    let mut q = [[0.0; 3]; 3];
    for (i, row) in q.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| a[i][j] * a[i][j])
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off = (a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2)).sqrt();
        if off <= scale * 1e-15 {
            break;
        }
        for (p, r) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][r].abs() <= scale * 1e-18 {
                continue;
            }
            let theta = (a[r][r] - a[p][p]) / (2.0 * a[p][r]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // Rotate rows/cols p and r of `a`.
            for k in 0..3 {
                let akp = a[k][p];
                let akr = a[k][r];
                a[k][p] = c * akp - s * akr;
                a[k][r] = s * akp + c * akr;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let ark = a[r][k];
                a[p][k] = c * apk - s * ark;
                a[r][k] = s * apk + c * ark;
            }
            // Accumulate the rotation into the eigenvector columns.
            for row in &mut q {
                let qp = row[p];
                let qr = row[r];
                row[p] = c * qp - s * qr;
                row[r] = s * qp + c * qr;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| a[y][y].partial_cmp(&a[x][x]).unwrap());
    let lam = [
        a[order[0]][order[0]],
        a[order[1]][order[1]],
        a[order[2]][order[2]],
    ];
    let mut qs = [[0.0; 3]; 3];
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..3 {
            qs[row][new_col] = q[row][old_col];
        }
    }
    (lam, qs)
}
