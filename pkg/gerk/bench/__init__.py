from .config import BenchConfig, DatasetSource, load_config_file
from .harness import (
    cmd_bench_unlearn,
    cmd_compare_aggregators,
    cmd_eval_utility,
    cmd_guideline,
    cmd_score_correlation,
    cmd_sweep_requests,
    cmd_sweep_shards,
    recommend,
    run_requests,
    sample_requests,
    score_correlation,
    state_f1,
    time_scratch,
)
from .report import (
    BenchReport,
    MethodResult,
    ShardRow,
    load_report,
    plot_report,
    write_report,
)
