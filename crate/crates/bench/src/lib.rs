//! Fixtures shared by the benchmarks.

use colsparse::experiments::{generate_instance, measurement_op, Instance};
use colsparse::{InstanceSpec, MeasurementOp, MeasurementVector};

/// A `k = s = 10`, `n = 100` instance of rank `r` with its operator and
/// measurements.
pub fn fixture(r: usize, m: usize, seed: u64) -> (Instance, MeasurementOp, MeasurementVector) {
    let spec = InstanceSpec { k: 10, n: 100, s: 10, r, seed };
    let inst = generate_instance(&spec).expect("valid spec");
    let op = measurement_op(&spec, m).expect("valid operator");
    let b = op.apply(&inst.matrix).expect("shapes agree");
    (inst, op, b)
}
