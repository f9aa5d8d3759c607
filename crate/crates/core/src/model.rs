//! Physical parameters, continuous dynamics, the P+d control law, and the
//! operator/environment force models for a pair of identical 1-DOF joints.

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("inertia must be positive, got {0}")]
    NonPositiveInertia(f64),
    #[error("{name} must be nonnegative, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositiveGain { name: &'static str, value: f64 },
    #[error("state contains non-finite entries")]
    NonFiniteState,
}

fn require_nonneg(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NegativeParameter { name, value })
    }
}

fn require_pos(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonPositiveGain { name, value })
    }
}

/// Inertia and viscous damping of one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotParams {
    m: f64,
    b: f64,
}

impl RobotParams {
    pub fn new(m: f64, b: f64) -> Result<Self, ModelError> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(ModelError::NonPositiveInertia(m));
        }
        require_nonneg("damping b", b)?;
        Ok(Self { m, b })
    }

    pub fn inertia(&self) -> f64 {
        self.m
    }

    pub fn damping(&self) -> f64 {
        self.b
    }
}

/// P+d controller gains shared by master and slave.
///
/// `kp` acts on position, `kv` on the velocity coordination error, `kd` is the
/// dissipation compensating the delayed proportional action, and `pe` is the
/// extra damping ensuring coordination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub kp: f64,
    pub kv: f64,
    pub kd: f64,
    pub pe: f64,
}

impl ControllerGains {
    pub fn new(kp: f64, kv: f64, kd: f64, pe: f64) -> Result<Self, ModelError> {
        require_pos("Kp", kp)?;
        require_pos("Kv", kv)?;
        require_nonneg("Kd", kd)?;
        require_nonneg("Pe", pe)?;
        Ok(Self { kp, kv, kd, pe })
    }

    /// Total velocity-path gain Kv + Kd + Pe.
    pub fn velocity_gain(&self) -> f64 {
        self.kv + self.kd + self.pe
    }
}

/// Forward (master to slave) and backward (slave to master) channel delays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayPair {
    pub t1: f64,
    pub t2: f64,
}

impl DelayPair {
    pub fn new(t1: f64, t2: f64) -> Result<Self, ModelError> {
        require_nonneg("T1", t1)?;
        require_nonneg("T2", t2)?;
        Ok(Self { t1, t2 })
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.t1 + self.t2)
    }
}

/// Reference trajectory driven by the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    Zero,
    /// Constant target from t = 0.
    Step { to: f64 },
    /// Linear ramp from 0 at the given rate, clamped at `to`.
    Ramp { to: f64, rate: f64 },
}

impl Reference {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Reference::Zero => 0.0,
            Reference::Step { to } => to,
            Reference::Ramp { to, rate } => {
                let v = rate * t;
                if rate >= 0.0 {
                    v.min(to)
                } else {
                    v.max(to)
                }
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        match *self {
            Reference::Zero => 0.0,
            Reference::Step { to } | Reference::Ramp { to, .. } => to.abs(),
        }
    }
}

/// Operator hand model: PD tracker pulling the master toward a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorModel {
    pub k_h: f64,
    pub b_h: f64,
    pub reference: Reference,
}

impl OperatorModel {
    pub fn new(k_h: f64, b_h: f64, reference: Reference) -> Result<Self, ModelError> {
        require_nonneg("k_h", k_h)?;
        require_nonneg("b_h", b_h)?;
        Ok(Self { k_h, b_h, reference })
    }

    pub fn passive() -> Self {
        Self { k_h: 0.0, b_h: 0.0, reference: Reference::Zero }
    }
}

/// Unilateral spring-damper wall the slave contacts from below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentModel {
    pub q_wall: f64,
    pub k_e: f64,
    pub b_e: f64,
}

impl EnvironmentModel {
    pub fn new(q_wall: f64, k_e: f64, b_e: f64) -> Result<Self, ModelError> {
        require_nonneg("k_e", k_e)?;
        require_nonneg("b_e", b_e)?;
        Ok(Self { q_wall, k_e, b_e })
    }

    pub fn free_space() -> Self {
        Self { q_wall: f64::INFINITY, k_e: 0.0, b_e: 0.0 }
    }
}

/// Joint state ordered x = [q; qdot].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub q: f64,
    pub qd: f64,
}

impl RobotState {
    pub fn new(q: f64, qd: f64) -> Result<Self, ModelError> {
        if q.is_finite() && qd.is_finite() {
            Ok(Self { q, qd })
        } else {
            Err(ModelError::NonFiniteState)
        }
    }

    pub fn zero() -> Self {
        Self { q: 0.0, qd: 0.0 }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.q, self.qd)
    }
}

/// Continuous state matrices A = [[0,1],[0,-b/m]], B = [[0],[1/m]].
pub fn continuous_matrices(params: RobotParams) -> (Matrix2<f64>, Vector2<f64>) {
    let a = Matrix2::new(0.0, 1.0, 0.0, -params.b / params.m);
    let b = Vector2::new(0.0, 1.0 / params.m);
    (a, b)
}

/// P+d control torque from a local sample and a delayed remote sample.
///
/// F = -Kv (qd_loc - qd_rem) - (Kd+Pe) qd_loc - Kp (q_loc - q_rem).
/// The same formula serves the master (remote = slave, delay T2) and the
/// slave (remote = master, delay T1).
pub fn pd_control_force(gains: ControllerGains, local: RobotState, remote_delayed: RobotState) -> f64 {
    coordination_force(gains, local, remote_delayed) + damping_force(gains, local.qd)
}

/// The sampled coordination part of the P+d law: position action on the local
/// sample plus the remote coupling. This is the portion that rides the
/// network pipeline in the hybrid simulation.
pub fn coordination_force(gains: ControllerGains, local: RobotState, remote_delayed: RobotState) -> f64 {
    -gains.kp * (local.q - remote_delayed.q) + gains.kv * remote_delayed.qd
}

/// The local dissipation part of the P+d law: -(Kv+Kd+Pe) qdot, injected
/// continuously at the joint.
pub fn damping_force(gains: ControllerGains, qd_local: f64) -> f64 {
    -gains.velocity_gain() * qd_local
}

/// Operator torque on the master: PD tracking of the reference.
pub fn operator_force(op: &OperatorModel, master: RobotState, t: f64) -> f64 {
    op.k_h * (op.reference.value(t) - master.q) - op.b_h * master.qd
}

/// Environment torque on the slave: unilateral spring-damper wall, zero in
/// free space (q <= q_wall). The spring part is continuous at the boundary;
/// the damping part switches there.
pub fn environment_force(env: &EnvironmentModel, slave: RobotState) -> f64 {
    if slave.q > env.q_wall {
        -env.k_e * (slave.q - env.q_wall) - env.b_e * slave.qd
    } else {
        0.0
    }
}

/// Dissipation gain matched to the channel delays: Kd = (T1+T2)/2 * Kp.
pub fn default_kd(delays: DelayPair, kp: f64) -> f64 {
    delays.mean() * kp
}

/// Section-6 experiment constants: the joint pair and gains used throughout
/// the numerical experiments.
pub mod reference_params {
    pub const INERTIA: f64 = 8.4796e-3;
    pub const DAMPING: f64 = 114.6e-6;
    pub const KP: f64 = 50.0;
    pub const KV: f64 = 1.0;
    pub const KD: f64 = 25.0;
    pub const T1: f64 = 0.6;
    pub const T2: f64 = 0.4;
    pub const OPERATOR_KH: f64 = 75.0;
    pub const OPERATOR_BH: f64 = 50.0;
    pub const WALL_POSITION: f64 = 4.0;
    pub const H_SET: [f64; 3] = [0.045, 0.09, 0.21];

    pub fn pe() -> f64 {
        0.001 * KD
    }
}
