//! Loop-candidate geometric verification and SE(3) pose-graph
//! optimization.
//!
//! Verified revisits become relative-pose edges; [`optimize`] then runs
//! damped Gauss-Newton (Levenberg-Marquardt) over the node poses with the
//! residual `r = log(Z_ij^-1 * T_i^-1 * T_j)` per edge, a fixed gauge
//! node, and a Huber kernel on loop-edge residual norms so an occasional
//! false loop cannot wreck the solution. Jacobians are central finite
//! differences (h = 1e-6) of the residual under right perturbations.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Cholesky, DMatrix, DVector, Matrix6, Vector6};
use thiserror::Error;

use crate::geometry::{GeometryError, PoseSE3, Trajectory};
use crate::matching::{enhance_matches, MatchConfig};
use crate::placedb::{KeyframeDatabase, KeyframeRecord, QueryParams};
use crate::rng::SplitMix64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("pose graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },
    #[error("node {0} does not exist in the graph")]
    UnknownNode(u64),
    #[error("edge endpoints must differ, got {0} twice")]
    SelfEdge(u64),
    #[error("information matrix is not symmetric positive definite")]
    InvalidInformation,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A verified loop-closure constraint between two keyframes.
#[derive(Debug, Clone)]
pub struct LoopEdge {
    /// Older keyframe id.
    pub from: u64,
    /// Newer keyframe id.
    pub to: u64,
    /// Relative pose constraint `Z` (pose of `to` in `from`'s frame).
    pub relative: PoseSE3,
    pub information: Matrix6<f64>,
    pub inlier_count: usize,
}

/// How [`geometric_verify`] derives the loop-edge relative pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoopConstraint {
    /// A verified revisit asserts the two poses coincide: `Z = I`. This
    /// is what corrects drift, since the toolkit carries no 3-D landmarks
    /// to triangulate a metric relative pose from.
    #[default]
    Coincidence,
    /// `Z` from the two stored insertion-time pose estimates. Useful as a
    /// diagnostic or when stored poses come from an external, already
    /// accurate source; against the live estimates it is zero-residual by
    /// construction and corrects nothing.
    StoredRelative,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub match_config: MatchConfig,
    /// Minimum surviving RANSAC inliers to accept the loop.
    pub min_inliers: usize,
    pub constraint: LoopConstraint,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            match_config: MatchConfig::default(),
            min_inliers: 25,
            constraint: LoopConstraint::default(),
        }
    }
}

/// Geometrically verify a loop candidate by running the matching
/// enhancement pipeline between the two retained feature sets.
///
/// Returns `None` (not an error) when the pair fails verification: too
/// few surviving inliers, no RANSAC consensus, or a self-pair. The edge
/// information is the identity scaled by the inlier count.
pub fn geometric_verify(
    query: &KeyframeRecord,
    candidate: &KeyframeRecord,
    config: &VerifyConfig,
    seed: u64,
) -> Option<LoopEdge> {
    if query.id == candidate.id {
        return None;
    }
    let report = enhance_matches(
        &query.features,
        &candidate.features,
        &config.match_config,
        seed,
    )
    .ok()?;
    let inliers = report.inlier_count();
    if inliers < config.min_inliers {
        return None;
    }

    // Orient the edge old -> new regardless of argument order.
    let (older, newer) = if candidate.id < query.id {
        (candidate, query)
    } else {
        (query, candidate)
    };
    let relative = match config.constraint {
        LoopConstraint::Coincidence => PoseSE3::identity(0.0),
        LoopConstraint::StoredRelative => older.pose.inverse().compose(&newer.pose),
    };
    Some(LoopEdge {
        from: older.id,
        to: newer.id,
        relative,
        information: Matrix6::identity() * inliers as f64,
        inlier_count: inliers,
    })
}

/// A relative-pose constraint in the graph.
#[derive(Debug, Clone)]
pub struct GraphEdge {
    pub from: u64,
    pub to: u64,
    /// Measured pose of `to` in `from`'s frame.
    pub measurement: PoseSE3,
    pub information: Matrix6<f64>,
}

/// Keyframe poses with sequential (odometry) and loop constraints.
#[derive(Debug, Clone, Default)]
pub struct PoseGraph {
    nodes: BTreeMap<u64, PoseSE3>,
    sequential: Vec<GraphEdge>,
    loops: Vec<GraphEdge>,
}

fn check_information(information: &Matrix6<f64>) -> Result<(), GraphError> {
    if (information - information.transpose()).amax() > 1e-9 {
        return Err(GraphError::InvalidInformation);
    }
    Cholesky::new(*information)
        .map(|_| ())
        .ok_or(GraphError::InvalidInformation)
}

impl PoseGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: u64, pose: PoseSE3) {
        self.nodes.insert(id, pose);
    }

    fn check_edge(&self, from: u64, to: u64, information: &Matrix6<f64>) -> Result<(), GraphError> {
        if from == to {
            return Err(GraphError::SelfEdge(from));
        }
        for id in [from, to] {
            if !self.nodes.contains_key(&id) {
                return Err(GraphError::UnknownNode(id));
            }
        }
        check_information(information)
    }

    pub fn add_sequential_edge(
        &mut self,
        from: u64,
        to: u64,
        measurement: PoseSE3,
        information: Matrix6<f64>,
    ) -> Result<(), GraphError> {
        self.check_edge(from, to, &information)?;
        self.sequential.push(GraphEdge {
            from,
            to,
            measurement,
            information,
        });
        Ok(())
    }

    pub fn add_loop_edge(&mut self, edge: &LoopEdge) -> Result<(), GraphError> {
        self.check_edge(edge.from, edge.to, &edge.information)?;
        self.loops.push(GraphEdge {
            from: edge.from,
            to: edge.to,
            measurement: edge.relative,
            information: edge.information,
        });
        Ok(())
    }

    pub fn nodes(&self) -> &BTreeMap<u64, PoseSE3> {
        &self.nodes
    }

    pub fn sequential_edges(&self) -> &[GraphEdge] {
        &self.sequential
    }

    pub fn loop_edges(&self) -> &[GraphEdge] {
        &self.loops
    }

    fn connected_components(&self) -> usize {
        let ids: Vec<u64> = self.nodes.keys().copied().collect();
        let ord: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut parent: Vec<usize> = (0..ids.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in self.sequential.iter().chain(self.loops.iter()) {
            let (a, b) = (ord[&e.from], ord[&e.to]);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        let mut roots: Vec<usize> = (0..ids.len()).map(|i| find(&mut parent, i)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeParams {
    pub max_iterations: usize,
    /// Terminate once the update step norm drops below this.
    pub tolerance: f64,
    /// Huber width applied to loop-edge residual norms.
    pub huber_width: f64,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-8,
            huber_width: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub poses: BTreeMap<u64, PoseSE3>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out before the step norm
    /// reached the tolerance; the poses are still the best found.
    pub converged: bool,
}

fn residual(edge: &GraphEdge, t_from: &PoseSE3, t_to: &PoseSE3) -> Vector6<f64> {
    edge.measurement
        .inverse()
        .compose(&t_from.inverse())
        .compose(t_to)
        .log()
}

/// Huber scaling factor for a residual of norm `s`: the edge's quadratic
/// cost is multiplied by `rho(s)/s^2`, its normal-equation weight by
/// `min(1, width/s)`.
fn huber_cost_scale(s: f64, width: f64) -> f64 {
    if s <= width || s == 0.0 {
        1.0
    } else {
        (2.0 * width * s - width * width) / (s * s)
    }
}

fn huber_weight(s: f64, width: f64) -> f64 {
    if s <= width || s == 0.0 {
        1.0
    } else {
        width / s
    }
}

struct Problem<'g> {
    edges: Vec<(&'g GraphEdge, bool)>,
    /// Free-node state indices; the fixed node is absent.
    state_index: HashMap<u64, usize>,
    huber_width: f64,
}

impl Problem<'_> {
    fn cost(&self, poses: &BTreeMap<u64, PoseSE3>) -> f64 {
        let mut total = 0.0;
        for &(edge, is_loop) in &self.edges {
            let r = residual(edge, &poses[&edge.from], &poses[&edge.to]);
            let quad = (r.transpose() * edge.information * r)[0];
            total += if is_loop {
                huber_cost_scale(r.norm(), self.huber_width) * quad
            } else {
                quad
            };
        }
        total
    }

    /// Assemble the damped-Gauss-Newton normal equations with central
    /// finite-difference Jacobians.
    fn normal_equations(
        &self,
        poses: &BTreeMap<u64, PoseSE3>,
    ) -> (DMatrix<f64>, DVector<f64>) {
        const FD_STEP: f64 = 1e-6;
        let dim = 6 * self.state_index.len();
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        let mut g = DVector::<f64>::zeros(dim);

        for &(edge, is_loop) in &self.edges {
            let t_from = poses[&edge.from];
            let t_to = poses[&edge.to];
            let r = residual(edge, &t_from, &t_to);
            let weight = if is_loop {
                huber_weight(r.norm(), self.huber_width)
            } else {
                1.0
            };
            let info = edge.information * weight;

            let fd_block = |perturb_from: bool| -> Matrix6<f64> {
                let mut jac = Matrix6::<f64>::zeros();
                for k in 0..6 {
                    let mut xi = Vector6::<f64>::zeros();
                    xi[k] = FD_STEP;
                    let plus = PoseSE3::exp(&xi);
                    xi[k] = -FD_STEP;
                    let minus = PoseSE3::exp(&xi);
                    let (rp, rm) = if perturb_from {
                        (
                            residual(edge, &t_from.compose(&plus), &t_to),
                            residual(edge, &t_from.compose(&minus), &t_to),
                        )
                    } else {
                        (
                            residual(edge, &t_from, &t_to.compose(&plus)),
                            residual(edge, &t_from, &t_to.compose(&minus)),
                        )
                    };
                    jac.set_column(k, &((rp - rm) / (2.0 * FD_STEP)));
                }
                jac
            };

            let idx_from = self.state_index.get(&edge.from).copied();
            let idx_to = self.state_index.get(&edge.to).copied();
            let j_from = idx_from.map(|_| fd_block(true));
            let j_to = idx_to.map(|_| fd_block(false));

            let mut scatter = |bi: usize, ji: &Matrix6<f64>, bj: usize, jj: &Matrix6<f64>| {
                let block = ji.transpose() * info * jj;
                h.view_mut((6 * bi, 6 * bj), (6, 6)).iter_mut().zip(block.iter()).for_each(
                    |(dst, &src)| *dst += src,
                );
            };
            if let (Some(bi), Some(ji)) = (idx_from, j_from.as_ref()) {
                scatter(bi, ji, bi, ji);
                g.rows_mut(6 * bi, 6).iter_mut().zip((ji.transpose() * info * r).iter()).for_each(
                    |(dst, &src)| *dst += src,
                );
            }
            if let (Some(bj), Some(jj)) = (idx_to, j_to.as_ref()) {
                scatter(bj, jj, bj, jj);
                g.rows_mut(6 * bj, 6).iter_mut().zip((jj.transpose() * info * r).iter()).for_each(
                    |(dst, &src)| *dst += src,
                );
            }
            if let (Some(bi), Some(ji), Some(bj), Some(jj)) =
                (idx_from, j_from.as_ref(), idx_to, j_to.as_ref())
            {
                scatter(bi, ji, bj, jj);
                scatter(bj, jj, bi, ji);
            }
        }
        (h, g)
    }

    fn apply_step(
        &self,
        poses: &BTreeMap<u64, PoseSE3>,
        delta: &DVector<f64>,
    ) -> BTreeMap<u64, PoseSE3> {
        let mut updated = poses.clone();
        for (&id, &slot) in &self.state_index {
            let xi = Vector6::from_iterator(delta.rows(6 * slot, 6).iter().copied());
            let t = updated[&id];
            updated.insert(id, t.compose(&PoseSE3::exp(&xi)).at_time(t.timestamp));
        }
        updated
    }
}

/// Optimize the graph's node poses by Levenberg-Marquardt, holding
/// `fixed` in place as the gauge.
///
/// The cost is the information-weighted squared residual over all edges
/// (Huber-scaled for loop edges); accepted steps never increase it.
/// Returns the corrected poses along with the achieved cost; a run that
/// exhausts `max_iterations` reports `converged = false` instead of
/// erroring.
pub fn optimize(
    graph: &PoseGraph,
    fixed: u64,
    params: &OptimizeParams,
) -> Result<OptimizeResult, GraphError> {
    if !graph.nodes.contains_key(&fixed) {
        return Err(GraphError::UnknownNode(fixed));
    }
    let components = graph.connected_components();
    if components > 1 {
        return Err(GraphError::DisconnectedGraph { components });
    }

    let state_index: HashMap<u64, usize> = graph
        .nodes
        .keys()
        .filter(|&&id| id != fixed)
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    let problem = Problem {
        edges: graph
            .sequential
            .iter()
            .map(|e| (e, false))
            .chain(graph.loops.iter().map(|e| (e, true)))
            .collect(),
        state_index,
        huber_width: params.huber_width,
    };

    let mut poses = graph.nodes.clone();
    let initial_cost = problem.cost(&poses);
    let mut cost = initial_cost;
    let mut converged = initial_cost == 0.0 || problem.state_index.is_empty();
    let mut iterations = 0;
    let mut lambda = 1e-6;

    while !converged && iterations < params.max_iterations {
        let (h, g) = problem.normal_equations(&poses);
        if g.amax() < 1e-15 {
            converged = true;
            break;
        }
        iterations += 1;

        let mut accepted = false;
        for _ in 0..32 {
            // Marquardt damping on the diagonal, floored to keep the
            // system positive definite near zero-curvature directions.
            let mut damped = h.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += lambda * h[(i, i)].max(1e-12);
            }
            let Some(chol) = Cholesky::new(damped) else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let candidate = problem.apply_step(&poses, &delta);
            let candidate_cost = problem.cost(&candidate);
            if candidate_cost <= cost {
                poses = candidate;
                cost = candidate_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if delta.norm() < params.tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !accepted {
            break; // damping exhausted; report best-so-far
        }
    }

    Ok(OptimizeResult {
        poses,
        initial_cost,
        final_cost: cost,
        iterations,
        converged,
    })
}

/// Configuration of the end-to-end loop-closing pipeline.
#[derive(Debug, Clone)]
pub struct LoopCloseConfig {
    pub query: QueryParams,
    pub verify: VerifyConfig,
    /// Information assigned to the sequential odometry edges.
    pub odometry_information: Matrix6<f64>,
    pub optimize: OptimizeParams,
}

impl Default for LoopCloseConfig {
    fn default() -> Self {
        // Rotation is held two orders stiffer than translation:
        // gyro-derived odometry orientation drifts far less than position,
        // and letting the optimizer bend rotations to absorb a translation
        // loop residual distorts the recovered shape.
        let mut odometry_information = Matrix6::identity() * 100.0;
        for k in 3..6 {
            odometry_information[(k, k)] = 10_000.0;
        }
        Self {
            query: QueryParams::default(),
            verify: VerifyConfig::default(),
            odometry_information,
            optimize: OptimizeParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoopCloseOutcome {
    /// Corrected keyframe trajectory (original timestamps). Equals the
    /// input poses when no loop was verified.
    pub corrected: Trajectory,
    pub edges: Vec<LoopEdge>,
    /// The constructed problem (initial node values plus all
    /// constraints), for dumping or external optimization. Present when
    /// at least one loop edge was found.
    pub graph: Option<PoseGraph>,
    /// Present when at least one loop edge was found and optimization
    /// ran.
    pub optimization: Option<OptimizeResult>,
}

/// Run retrieval, geometric verification, and pose-graph optimization
/// over a finished keyframe database: the back half of a loop-closing
/// SLAM pipeline.
///
/// Every keyframe queries the database as of its own insertion time;
/// ranked candidates are verified in order and the first acceptance
/// becomes that keyframe's loop edge. Sequential edges take their
/// measurements from the stored (odometric) poses.
pub fn close_loops(
    db: &KeyframeDatabase,
    config: &LoopCloseConfig,
    seed: u64,
) -> Result<LoopCloseOutcome, GraphError> {
    let records = db.records();
    let passthrough = |edges: Vec<LoopEdge>| -> Result<LoopCloseOutcome, GraphError> {
        let poses: Vec<PoseSE3> = records
            .iter()
            .map(|r| r.pose.at_time(r.timestamp))
            .collect();
        Ok(LoopCloseOutcome {
            corrected: Trajectory::new(poses)?,
            edges,
            graph: None,
            optimization: None,
        })
    };
    if records.len() < 2 {
        return passthrough(Vec::new());
    }

    let mut edges: Vec<LoopEdge> = Vec::new();
    for record in records {
        let candidates = db.query_at(record.id, &record.bow, &config.query);
        for candidate in candidates {
            let loop_seed = SplitMix64::child_seed(seed, record.id);
            let other = db.record(candidate.id).expect("candidate ids come from the db");
            if let Some(edge) = geometric_verify(record, other, &config.verify, loop_seed) {
                edges.push(edge);
                break;
            }
        }
    }
    if edges.is_empty() {
        return passthrough(edges);
    }

    let mut graph = PoseGraph::new();
    for r in records {
        graph.add_node(r.id, r.pose.at_time(r.timestamp));
    }
    for pair in records.windows(2) {
        graph.add_sequential_edge(
            pair[0].id,
            pair[1].id,
            pair[0].pose.inverse().compose(&pair[1].pose),
            config.odometry_information,
        )?;
    }
    for e in &edges {
        graph.add_loop_edge(e)?;
    }

    let result = optimize(&graph, records[0].id, &config.optimize)?;
    let corrected: Vec<PoseSE3> = records
        .iter()
        .map(|r| result.poses[&r.id].at_time(r.timestamp))
        .collect();
    Ok(LoopCloseOutcome {
        corrected: Trajectory::new(corrected)?,
        edges,
        graph: Some(graph),
        optimization: Some(result),
    })
}
