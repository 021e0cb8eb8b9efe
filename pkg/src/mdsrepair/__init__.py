"""Systematic MDS array codes with repair-bandwidth-optimal single-node repair."""

from .alignment import (
    AlignmentInstance,
    SimpleTriple,
    default_framework,
    framework_preset,
    solve_problem1,
    solve_problem2,
    solve_simple,
    stitch,
    verify_instance,
    verify_simple,
)
from .cluster import ClusterState, Manifest, fail, ingest, open_cluster, reconstruct, repair_node
from .codes import (
    CodeSpec,
    Construction,
    MdsReport,
    TensorFramework,
    build_code,
    build_explicit_2parity,
    build_explicit_3parity,
    build_P,
    build_random_code,
    build_tensor_code,
    deserialize,
    repair_matrix,
    serialize,
    verify_mds,
    verify_repair_conditions,
)
from .gf import FieldElement, PrimeField, make_field
from .indexing import IndexSystem
from .linalg import Matrix
from .repair import (
    NodeVector,
    RepairMetrics,
    RepairPlan,
    Stripe,
    decode,
    encode,
    execute_repair,
    plan_repair,
    recoverable_dimension,
)

__version__ = "0.1.0"
