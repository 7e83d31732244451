"""optembed: embed trained ML predictors into an optimization-model IR."""

from .bounds import attach_bounds, propagate
from .errors import (
    DimensionError,
    ForeignVariable,
    HessianUnavailable,
    IncompleteAssignment,
    InvalidBounds,
    InvalidConfig,
    InvalidSOS,
    NonDifferentiablePredictor,
    NonlinearNotExportable,
    OptEmbedError,
    OracleNotExportable,
    ParseError,
    UnboundedInput,
    UnsupportedReducedSpace,
)
from .export import (
    lp_text,
    model_json_obj,
    model_json_text,
    models_structurally_equal,
    read_model_json,
    write_lp,
    write_model_json,
)
from .formulate import (
    Formulation,
    add_predictor,
    entry_value,
    formulate_affine,
    formulate_ensemble,
    formulate_pipeline,
    formulate_relu,
    formulate_smooth_activation,
    formulate_softmax,
    formulate_tree,
    witness_assignment,
)
from .graybox import (
    OracleExpr,
    OracleHandle,
    add_gray_box,
    hessian_lagrangian,
    jacobian,
    make_oracle,
)
from .ir import (
    Expr,
    Interval,
    Model,
    VariableRef,
    eval_expr,
)
from .predictors import (
    Affine,
    BinaryDecisionTree,
    Dims,
    FormulationConfig,
    GradientBoostedTrees,
    Leaf,
    Pipeline,
    Predictor,
    RandomForest,
    ReLU,
    ReluVariant,
    Sigmoid,
    SoftMax,
    SoftPlus,
    Split,
    Tanh,
    apply_config,
    dims,
    dump_predictor,
    load_predictor,
    logistic_regression,
    parse_predictor,
    predict,
    predictor_json,
)

__version__ = "0.1.0"
