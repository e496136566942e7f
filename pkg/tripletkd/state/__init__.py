from tripletkd.state.metrics_store import COLUMNS, MetricsStore, read_metrics

__all__ = ["COLUMNS", "MetricsStore", "read_metrics"]
