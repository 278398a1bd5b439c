"""Temporally-versioned statute retrieval and rollout toolkit."""

from .agent import (
    Action,
    BenchmarkItem,
    FormatError,
    RolloutLimits,
    Step,
    Trajectory,
    count_temporal_queries,
    extract_answer,
    is_temporal_query,
    load_items,
    parse_agent_output,
    read_trajectories,
    render_state,
    serialize_step,
    validate_format,
    write_trajectories,
)
from .analyzer import (
    AnalysisError,
    AnalyzerConfig,
    PatternAnalyzer,
    QueryAnalysis,
    analyze_query,
    expand_partial_date,
    normalize_article_ref,
)
from .corpus import (
    CorpusError,
    CorpusIndex,
    ProvisionVersion,
    TemporalWindow,
    effective_at,
    ingest_corpus,
    load_index,
    save_index,
    validate_corpus,
)
from .config import ConfigError, RunConfig, load_run_config
from .embedding import NgramEmbedder, cosine
from .grpo import (
    RolloutGroup,
    group_report,
    ShapingConfig,
    broadcast_advantage,
    group_advantages,
    grpo_objective,
    shape_advantages,
)
from .retrieval import (
    ChannelRanking,
    FusedHit,
    RetrievalConfig,
    RetrievalEngine,
    retrieve,
    rrf_fuse,
    temporal_filter,
)
from .rollout import (
    PolicyBackend,
    RecitePolicy,
    RemotePolicy,
    RolloutError,
    ScriptFilePolicy,
    ScriptedPolicy,
    run_items,
    run_rollout,
)
from .service import create_app
from .scoring import (
    JudgeError,
    PhraseJudge,
    ScoreReport,
    ScoringConfig,
    ScoringError,
    evaluate_run,
    reward,
    rouge_l_char,
    score_ptp,
    score_ccp,
    score_exact,
    score_lar,
    score_lcs,
)
from .tools import (
    ContextStore,
    FixturePageSource,
    FixtureSearchClient,
    SearchResult,
    ToolRegistry,
    ToolRequest,
    browse_webpage,
    dispatch,
    validate_tool_request,
    web_search,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AnalysisError",
    "AnalyzerConfig",
    "BenchmarkItem",
    "ChannelRanking",
    "ConfigError",
    "ContextStore",
    "CorpusError",
    "CorpusIndex",
    "FixturePageSource",
    "FixtureSearchClient",
    "FormatError",
    "FusedHit",
    "JudgeError",
    "NgramEmbedder",
    "PatternAnalyzer",
    "PhraseJudge",
    "PolicyBackend",
    "ProvisionVersion",
    "QueryAnalysis",
    "RecitePolicy",
    "RemotePolicy",
    "RetrievalConfig",
    "RetrievalEngine",
    "RolloutError",
    "RolloutGroup",
    "RolloutLimits",
    "RunConfig",
    "ScoreReport",
    "ScoringConfig",
    "ScoringError",
    "ScriptFilePolicy",
    "ScriptedPolicy",
    "SearchResult",
    "ShapingConfig",
    "Step",
    "TemporalWindow",
    "ToolRegistry",
    "ToolRequest",
    "Trajectory",
    "analyze_query",
    "broadcast_advantage",
    "browse_webpage",
    "cosine",
    "count_temporal_queries",
    "create_app",
    "dispatch",
    "effective_at",
    "evaluate_run",
    "expand_partial_date",
    "extract_answer",
    "group_advantages",
    "group_report",
    "grpo_objective",
    "ingest_corpus",
    "is_temporal_query",
    "load_index",
    "load_items",
    "load_run_config",
    "normalize_article_ref",
    "parse_agent_output",
    "read_trajectories",
    "render_state",
    "retrieve",
    "reward",
    "rouge_l_char",
    "rrf_fuse",
    "run_items",
    "run_rollout",
    "save_index",
    "score_ccp",
    "score_exact",
    "score_lar",
    "score_lcs",
    "score_ptp",
    "serialize_step",
    "shape_advantages",
    "temporal_filter",
    "validate_corpus",
    "validate_format",
    "validate_tool_request",
    "web_search",
    "write_trajectories",
]
