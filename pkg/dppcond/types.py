from typing import Any, Literal, TypedDict

Mode = Literal["exact", "mc"]
ModeRequest = Literal["exact", "mc", "both"]
Status = Literal["regular", "degenerate"]
PalmMethod = Literal["recursive", "det_ratio"]


class StageRecord(TypedDict):
    window_size: int
    trace_distance: float
    operator_distance: float


class KernelEntry(TypedDict, total=False):
    kernel_id: str
    kernel: Any
    source: str


class RunState(TypedDict, total=False):
    config: Any
    kernels: list[KernelEntry]
    jobs: list[Any]
    results: list[Any]
    errors: list[str]
    exit_code: int
    written: list[str]
    run_metadata: dict
