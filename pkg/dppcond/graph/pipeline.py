from __future__ import annotations

import asyncio
import logging
import platform
from collections import defaultdict
from datetime import datetime, timezone

import numpy as np
import scipy
from langgraph.graph import END, StateGraph

from dppcond.checks.registry import CheckJob, job_seed, run_job
from dppcond.config import overridden, settings
from dppcond.corpus import load_manifest
from dppcond.errors import DppError
from dppcond.experiment import ExperimentConfig, check_modes
from dppcond.kernel.factories import build_kernel
from dppcond.kernel.io import load_kernel
from dppcond.report import write_report
from dppcond.types import KernelEntry, RunState

logger = logging.getLogger(__name__)

StateType = RunState


# Nodes
async def start_step(state: StateType) -> StateType:
    state['run_metadata'] = {'started_at': datetime.now(timezone.utc).isoformat()}
    state.setdefault('errors', [])
    return state


async def load_step(state: StateType) -> StateType:
    config: ExperimentConfig = state['config']
    source = config.kernel
    try:
        if source.corpus is not None:
            kernels = [KernelEntry(kernel_id=kid, kernel=k, source=source.corpus) for kid, k in load_manifest(source.corpus)]
        elif source.path is not None:
            kernels = [KernelEntry(kernel_id=source.path, kernel=load_kernel(source.path), source=source.path)]
        else:
            label = source.describe()
            kernels = [KernelEntry(kernel_id=label, kernel=build_kernel(source.factory, source.params), source=label)]
    except DppError as e:
        logger.error('could not load kernels: %s', e)
        state['errors'].append(f'{type(e).__name__}: {e}')
        state['kernels'] = []
        state['exit_code'] = e.exit_code
        return state

    jobs = []
    instances: dict[str, int] = defaultdict(int)
    for entry in kernels:
        for request in config.checks:
            instance = instances[request.id]
            instances[request.id] += 1
            for mode in check_modes(config, request):
                jobs.append(CheckJob(
                    check_id=request.id,
                    kernel=entry['kernel'],
                    kernel_id=entry['kernel_id'],
                    instance=instance,
                    mode=mode,
                    trials=config.trials,
                    seed=job_seed(config.seed, request.id, instance, mode),
                    params=request.params,
                    tolerance=config.check_tolerance(request),
                ))
    state['kernels'] = kernels
    state['jobs'] = jobs
    logger.info('%d kernels, %d check jobs', len(kernels), len(jobs))
    return state


def route_after_load(state: StateType):
    return 'report_step' if state.get('exit_code') else 'checks_step'


async def checks_step(state: StateType) -> StateType:
    gate = asyncio.Semaphore(settings.threads)

    async def run(job: CheckJob):
        async with gate:
            return await asyncio.to_thread(run_job, job)

    outcomes = await asyncio.gather(*(run(job) for job in state.get('jobs', [])))
    state['results'] = [result for result, _ in outcomes]
    state['exit_code'] = max((code for _, code in outcomes), default=0)
    for result, code in outcomes:
        if code >= 2:
            state['errors'].append(f"{result.check_id}[{result.instance}]: {result.details.get('error')}")
    return state


async def report_step(state: StateType) -> StateType:
    config: ExperimentConfig = state['config']
    run_meta = state.get('run_metadata', {})
    try:
        start = datetime.fromisoformat(run_meta.get('started_at'))
        run_meta['duration_ms'] = int((datetime.now(timezone.utc) - start).total_seconds() * 1000)
    except (TypeError, ValueError):
        run_meta['duration_ms'] = None
    run_meta.update({
        'seed': config.seed,
        'threads': settings.threads,
        'kernels': [e['kernel_id'] for e in state.get('kernels', [])],
        'errors': state.get('errors', []),
        'versions': {'python': platform.python_version(), 'numpy': np.__version__, 'scipy': scipy.__version__},
    })
    try:
        written = write_report(config.output_dir, state.get('results', []), run_meta)
    except DppError as e:
        logger.error('could not write the report: %s', e)
        state['exit_code'] = max(state.get('exit_code', 0), e.exit_code)
        written = []
    state['written'] = [str(p) for p in written]
    state['run_metadata'] = run_meta
    state.setdefault('exit_code', 0)
    return state


# Graph construction

def build_graph():
    graph = StateGraph(StateType)
    graph.add_node('start_step', start_step)
    graph.add_node('load_step', load_step)
    graph.add_node('checks_step', checks_step)
    graph.add_node('report_step', report_step)

    graph.set_entry_point('start_step')
    graph.add_edge('start_step', 'load_step')
    graph.add_conditional_edges('load_step', route_after_load, {
        'checks_step': 'checks_step',
        'report_step': 'report_step',
    })
    graph.add_edge('checks_step', 'report_step')
    graph.add_edge('report_step', END)
    return graph.compile()


async def run_experiment(config: ExperimentConfig) -> RunState:
    """Run every requested check with the config's setting overrides in force."""
    with overridden(config.setting_overrides()):
        return await build_graph().ainvoke({'config': config})
