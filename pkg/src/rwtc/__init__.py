"""Real-world type checking for system configurations."""

from rwtc.checker import CheckReport, check_config, check_field, lift_value, recheck
from rwtc.expr import eval_expr, parse_expr, to_source, typecheck_expr
from rwtc.ingest import merge_configs, parse_site_file, serialize_config
from rwtc.model import (
    REFERENCE_ENV,
    BaseValue,
    Diagnostic,
    DiagnosticKind,
    Environment,
    JavaOpts,
    RawConfig,
    RTipe,
    load_env,
    parse_java_opts,
    render_base_value,
)
from rwtc.schema import ConfigSchema, FieldSpec, bundled_hadoop_schema, explain_field, load_schema
from rwtc.search import build_grid, compute_savings, mock_profiler, run_search, sample_candidates

__version__ = "0.1.0"
