"""Chebyshev polynomial graph filters with Gibbs damping factors.

A spectral graph filtering and node-classification toolkit: sparse
Chebyshev filter recurrences with Jackson and Lanczos damping, a dense
eigendecomposition oracle for verification, a scalar Gibbs-phenomenon
workbench, and a desk-scale training pipeline with manual gradients.
"""

__version__ = "0.1.0"

from .data_io import (
    Dataset,
    expected_sbm_homophily,
    load_dataset,
    load_dataset_dir,
    planetoid_split,
    random_split,
    save_dataset_dir,
    sbm_generate,
)
from .graph_core import (
    Graph,
    HomophilyReport,
    SparseOperator,
    build_graph,
    diffusion_distance,
    estimate_lambda_max,
    node_homophily,
    renormalized_adjacency,
    scaled_laplacian,
    select_gso,
    spectral_gap,
    sym_norm_adjacency,
    sym_norm_laplacian,
)
from .model import (
    AblationParams,
    ModelParams,
    TrainConfig,
    backward,
    build_gso,
    chebnet_gibbs_layer,
    evaluate,
    evaluate_ablation,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
    train_ablation,
)
from .nn_core import (
    AdamState,
    LinearLayer,
    adam_step,
    backward_mlp,
    init_linear,
    mlp_forward,
    silu,
    softmax_cross_entropy,
)
from .poly_filters import (
    FilterSpec,
    apply_poly_filter,
    cheb_terms,
    damping_vector,
    jackson_factor,
    lanczos_factor,
    scalar_response,
)
from .scalar_approx import (
    ApproxReport,
    TargetFunction,
    bernstein_eval,
    builtin_target,
    cheb_coefficients,
    cheb_eval,
    cheb_nodes,
    convergence_curve,
    measure_gibbs,
)
from .spectral_oracle import (
    EigenSystem,
    apply_filter_spectral,
    eigendecompose,
    fit_vandermonde,
    graph_fourier,
    inverse_graph_fourier,
)
