//! Shared model builders for the benchmark targets.

use clustermax::cluster::{ClusterForm, ClusterMechanism, OffsetLaw, ParentProcess, RenewalLaw, SizeLaw};
use clustermax::hawkes::{FertilityModel, Kernel};
use clustermax::marks::{MarkEffect, MarkFamily, MarkModel};
use clustermax::maxima::CountLaw;

pub fn pareto_marks() -> MarkModel {
    MarkModel::new(MarkFamily::pareto(2.0).unwrap())
}

pub fn poisson_parent() -> ParentProcess {
    ParentProcess::new(RenewalLaw::Exponential { rate: 1.0 }).unwrap()
}

pub fn mixed_binomial(marks: &MarkModel) -> ClusterMechanism {
    ClusterMechanism::new(
        ClusterForm::MixedBinomial,
        SizeLaw::Count(CountLaw::Poisson { mean: 1.0 }),
        OffsetLaw::Exponential { rate: 1.0 },
        marks,
    )
    .unwrap()
}

pub fn exp_fertility(kappa: f64) -> FertilityModel {
    FertilityModel::new(
        Kernel::Exponential { decay: 1.0 },
        kappa,
        MarkEffect::Constant,
        &pareto_marks(),
    )
    .unwrap()
}
