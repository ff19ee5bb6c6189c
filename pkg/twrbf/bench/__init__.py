from .config import RunConfig, RunMode, build_config, load_config
from .harness import convergence_trace, run, summarize
from .records import ResultRecord, TraceRecord, read_results, read_traces
