"""Alpha factor DSL: parsing, evaluation, scoring and descriptions."""

from .describe import describe, describe_expr
from .evaluate import InsufficientHistory, evaluate, evaluate_panel
from .expr import (
    AlphaParseError,
    ArityError,
    Binary,
    Corr,
    ExprSyntaxError,
    Field,
    InvalidWindow,
    Literal,
    Rank,
    TsOp,
    Unary,
    UnknownFunction,
    depth,
    lookback,
    parse,
    to_string,
)
from .factors import (
    AlphaRecord,
    CombineResult,
    FactorMatrix,
    FactorSlice,
    LinearZScoreCombiner,
    build_factor_matrix,
    bundled_library_path,
    combine_score,
    load_library,
    top_k_contributors,
)
