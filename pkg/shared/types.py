from typing import TypedDict, List, Dict, Any, Optional


class GraphRecordDict(TypedDict):
    """
    One dataset row as persisted in records_n<N>.jsonl (key order is the file order)
    """
    n: int
    k: int
    index: int
    seed_master: int
    seed_stream: int
    spectrum: List[float]        # descending adjacency eigenvalues, length n
    h_num: int                   # |dF| of the minimizing witness
    h_den: int                   # |F| of the minimizing witness
    h: float


class RunLogRowDict(TypedDict, total=False):
    """
    One row of runs.jsonl (appended by every CLI workflow)
    """
    ts_utc: str
    command: str
    status: str
    config: Dict[str, Any]
    outputs: List[str]
    summary: Dict[str, Any]
    error: Optional[str]


class ChartManifestDict(TypedDict):
    """
    manifest.json written next to emitted charts
    """
    report: str
    charts: List[str]
    tables: List[str]
    skipped: List[str]           # "<chart>: <why>" for empty series
