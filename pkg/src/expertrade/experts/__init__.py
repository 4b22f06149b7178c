"""Expert prompt construction, backends, response parsing and summarization."""

from .backends import (
    BackendError,
    ExpertBackend,
    LatentScoreMock,
    MockBackend,
    RemoteBackend,
    RemoteConfig,
    ScriptedBackend,
)
from .general import Comparison, general_compare, general_predict
from .parsing import MissingPrediction, ResponseParseError, UnknownLabel, parse_choice, parse_response, render_response
from .prompts import (
    EmptyArticle,
    EmptyFactorList,
    build_alpha_prompt,
    build_fundamental_prompt,
    build_general_compare_prompt,
    build_general_predict_prompt,
    build_market_prompt,
    build_news_prompt,
)
from .schema import (
    DISPLAY_NAMES,
    SPECIALISTS,
    ComparisonChoice,
    ExpertKind,
    ExpertReport,
    FiveClassLabel,
    PromptBundle,
    SummarizedReport,
)
from .summary import summarize_reports

__all__ = [name for name in dir() if not name.startswith("_")]
