#!/usr/bin/env python3
"""
Channel Plugin for OAMSIM
Iterates the averaged channel and tracks the trace distance to its limit
"""

import asyncio
from typing import Any, Dict

from ..channel import invariant_state, iterate_channel, resonant_limit, sector_weights
from ..core import AnalysisPlugin, failure_result
from ..fock_ops import build_kraus
from ..resonance import Regime, classify_regime, resolve_resonances, sector_partition


class ChannelPlugin(AnalysisPlugin):
    """Relaxation of the averaged channel"""

    @property
    def name(self) -> str:
        return "Channel"

    @property
    def version(self) -> str:
        return "1.0.0"

    @property
    def description(self) -> str:
        return "Iterates the averaged channel toward its limit state"

    async def initialize(self, core_app) -> bool:
        self.core = core_app
        self.logger = core_app.logger.getChild(self.name)
        return True

    async def cleanup(self) -> None:
        pass

    def _run(self, data: Dict[str, Any]) -> Dict[str, Any]:
        config = self.core.config
        params = self.core.params
        d = config.truncation
        rho0 = self.core.initial_state()
        kraus = build_kraus(params, d)

        rs = resolve_resonances(params, d)
        regime = classify_regime(rs)
        if regime is Regime.NON_RESONANT:
            target = invariant_state(params.theta, d)
            partition = None
        else:
            partition = sector_partition(rs, d)
            target = resonant_limit(rho0, partition, params.theta, d)

        report = iterate_channel(rho0, kraus, target, config.channel_tol, config.channel_t_max,
                                 record_every=int(data.get("record_every",
                                                           config.checkpoint_every or 1)))
        payload = {"regime": regime.value, **report.to_dict()}
        if partition is not None:
            payload["partition"] = partition.to_dict()
            payload["sector_weights"] = sector_weights(rho0, partition).tolist()

        self.core.write_table("channel", [{"t": t, "trace_distance": dist}
                                          for t, dist in report.distances],
                              ["t", "trace_distance"])
        self.core.write_summary("channel", payload)
        self.logger.info(f"{report.iterations} iterations, final distance "
                         f"{report.final_distance:.3e}")
        return {"plugin": self.name, "status": "completed", "regime": regime.value,
                **report.to_dict()}

    async def analyze(self, data: Any) -> Dict[str, Any]:
        try:
            return await asyncio.to_thread(self._run, data or {})
        except Exception as e:
            self.logger.error(f"channel iteration failed: {e}")
            return failure_result(self.name, e)
