#!/usr/bin/env python3
"""
Simulation Plugin for OAMSIM
Runs quantum trajectory ensembles, or the classical birth-death chain
for diagonal initial states
"""

import asyncio
from typing import Any, Dict

import numpy as np

from ..birth_death import build_kernel, draw_outcome, gibbs_measure, sample_chain
from ..core import AnalysisPlugin, failure_result
from ..resonance import degenerate_set, resolve_resonances
from ..trajectory import nonpurification_probability, run_ensemble, trajectory_rng

TRAJECTORY_COLUMNS = ["traj_id", "t", "m_max", "n_hat", "gap", "gap_bound",
                      "purity", "mean_photon_number", "leakage"]


class SimulationPlugin(AnalysisPlugin):
    """Ensemble simulation of the measured maser"""

    @property
    def name(self) -> str:
        return "Simulation"

    @property
    def version(self) -> str:
        return "1.0.0"

    @property
    def description(self) -> str:
        return "Quantum trajectory ensembles or the classical birth-death chain"

    async def initialize(self, core_app) -> bool:
        self.core = core_app
        self.logger = core_app.logger.getChild(self.name)
        return True

    async def cleanup(self) -> None:
        pass

    def _quantum(self) -> Dict[str, Any]:
        config = self.core.config
        params = self.core.params
        d = config.truncation
        seed = self.core.resolve_seed()
        rho0 = self.core.initial_state()

        ensemble = run_ensemble(rho0, params, d, config.horizon, config.n_trajectories, seed,
                                checkpoint_every=config.checkpoint_every,
                                max_workers=config.max_workers,
                                guard=config.guard, leakage_budget=config.leakage_budget)
        summary = ensemble.summary()

        payload: Dict[str, Any] = {"mode": "quantum", "ensemble": summary}
        if params.is_exact or params.injected:
            report = degenerate_set(resolve_resonances(params, d), params)
            if report.degenerate:
                payload["nonpurification_probability"] = nonpurification_probability(rho0, report)
                payload["degenerate_levels"] = list(report.n_set)

        self.core.write_table("trajectories", ensemble.checkpoint_rows(), TRAJECTORY_COLUMNS)
        self.core.write_summary("simulate", payload)
        self.logger.info(f"median gap {summary['median_gap']:.3e}, "
                         f"median m_max {summary['median_m_max']:.4f}")
        return {"plugin": self.name, "status": "completed", "mode": "quantum", **summary}

    def _classical(self) -> Dict[str, Any]:
        config = self.core.config
        params = self.core.params
        d = config.truncation
        seed = self.core.resolve_seed()
        kernel = build_kernel(params, d)
        start_law = self.core.initial_state().diagonal

        occupation = np.zeros(d + 1)
        finals = np.zeros(d + 1, dtype=np.int64)
        dead = 0
        worst_leakage = 0.0
        steps = []
        for i in range(config.n_trajectories):
            rng = trajectory_rng(seed, i)
            k, _ = draw_outcome(start_law, rng)
            path = sample_chain(k, kernel, config.horizon, rng)
            levels = path.levels
            steps.extend({"traj_id": i, "t": t, "level": int(level),
                          "outcome": path.outcomes[t - 1].value if t > 0 else ""}
                         for t, level in enumerate(levels))
            alive = levels[levels >= 0]
            occupation += np.bincount(alive, minlength=d + 1)[:d + 1]
            if levels[-1] >= 0:
                finals[levels[-1]] += 1
            else:
                dead += 1
            worst_leakage = max(worst_leakage, path.leakage)

        occupation /= max(1.0, occupation.sum())
        gibbs = None
        if params.theta > 0:
            g = gibbs_measure(params.theta, d)
            gibbs = g.weights / g.weights.sum()
        rows = [{"level": n, "occupation": occupation[n], "final_count": int(finals[n]),
                 "gibbs": None if gibbs is None else gibbs[n]} for n in range(d + 1)]

        summary = {
            "n_trajectories": config.n_trajectories,
            "dead": dead,
            "max_leakage": worst_leakage,
            "mean_level": float(np.dot(np.arange(d + 1), occupation)),
        }
        if gibbs is not None:
            summary["occupation_tv_to_gibbs"] = float(0.5 * np.abs(occupation - gibbs).sum())
        self.core.write_table("classical", rows, ["level", "occupation", "final_count", "gibbs"])
        self.core.write_table("classical_steps", steps, ["traj_id", "t", "level", "outcome"])
        self.core.write_summary("simulate", {"mode": "classical", "chain": summary})
        return {"plugin": self.name, "status": "completed", "mode": "classical", **summary}

    async def analyze(self, data: Any) -> Dict[str, Any]:
        data = data or {}
        try:
            if data.get("classical"):
                return await asyncio.to_thread(self._classical)
            return await asyncio.to_thread(self._quantum)
        except Exception as e:
            self.logger.error(f"simulation failed: {e}")
            return failure_result(self.name, e)
