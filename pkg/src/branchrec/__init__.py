"""Branch decompositions of many-body pure states from redundantly recorded observables."""
from .branches import (BranchDecomposition, CompatibilityVerdict, branch_entropy, check_theorem_identities,
                       coarse_grain, joint_decomposition, projector_product)
from .errors import ConfigError, DomainError, NumericalError, RankAmbiguityWarning, ResourceError
from .estimator import ObservableProduct, SampleReport, npoint_exact, npoint_sampled
from .opalgebra import OperatorAlgebra, commutant, generate_algebra, minimal_central_projections
from .records import (DetectionResult, ExtensionRefusal, RecordedObservable, RecordProjector, extend_record,
                      finest_common_records, scan_records, verify_record)
from .regions import Region, RegionLayout, disjoint, pair_covers, prune_to_noncovering, sphere_criterion
from .statecore import (DensityMatrix, Lattice, PureState, apply_region_operator, reduced_density_matrix,
                        schmidt)

__version__ = "0.1.0"

__all__ = [
    "BranchDecomposition",
    "CompatibilityVerdict",
    "branch_entropy",
    "check_theorem_identities",
    "coarse_grain",
    "joint_decomposition",
    "projector_product",
    "ConfigError",
    "DomainError",
    "NumericalError",
    "RankAmbiguityWarning",
    "ResourceError",
    "ObservableProduct",
    "SampleReport",
    "npoint_exact",
    "npoint_sampled",
    "OperatorAlgebra",
    "commutant",
    "generate_algebra",
    "minimal_central_projections",
    "DetectionResult",
    "ExtensionRefusal",
    "RecordedObservable",
    "RecordProjector",
    "extend_record",
    "finest_common_records",
    "scan_records",
    "verify_record",
    "Region",
    "RegionLayout",
    "disjoint",
    "pair_covers",
    "prune_to_noncovering",
    "sphere_criterion",
    "DensityMatrix",
    "Lattice",
    "PureState",
    "apply_region_operator",
    "reduced_density_matrix",
    "schmidt",
]
