#!/usr/bin/env python3
"""
Resonances Plugin for OAMSIM
Lists resonant levels, the sector partition and the degenerate set N(xi, eta)
"""

import asyncio
from typing import Any, Dict

from ..core import AnalysisPlugin, failure_result
from ..resonance import (classify_regime, degenerate_set, resolve_resonances,
                         search_degenerate, sector_partition)


class ResonancesPlugin(AnalysisPlugin):
    """Resonance arithmetic for the configured parameters"""

    @property
    def name(self) -> str:
        return "Resonances"

    @property
    def version(self) -> str:
        return "1.0.0"

    @property
    def description(self) -> str:
        return "Resonant levels, sector partition and degenerate set"

    async def initialize(self, core_app) -> bool:
        self.core = core_app
        self.logger = core_app.logger.getChild(self.name)
        return True

    async def cleanup(self) -> None:
        pass

    def _run(self, data: Dict[str, Any]) -> Dict[str, Any]:
        config = self.core.config
        params = self.core.params
        n_max = int(data.get("n_max", config.n_max))

        rs = resolve_resonances(params, n_max)
        regime = classify_regime(rs)
        partition = sector_partition(rs, n_max)
        report = degenerate_set(rs, params)
        self.logger.info(f"{regime.value}: {len(rs)} resonances up to {n_max}, "
                         f"N = {list(report.n_set)}")

        payload: Dict[str, Any] = {
            "params": params.to_dict(),
            "regime": regime.value,
            "resonances": rs.to_dict(),
            "partition": partition.to_dict(),
            "degeneracy": report.to_dict(),
        }

        search = data.get("search")
        if search:
            found = search_degenerate(
                xi_den_max=int(search["xi_den_max"]),
                eta_num_max=int(search["eta_num_max"]),
                n_max=int(search.get("n_max", n_max)),
                xi_num_max=search.get("xi_num_max"),
                eta_den_max=int(search.get("eta_den_max", 1)),
                max_workers=config.max_workers,
            )
            payload["search"] = {
                "bounds": dict(search),
                "degenerate_pairs": [
                    {"xi": str(xi), "eta": str(eta), "n_set": list(n_set)}
                    for xi, eta, n_set in found
                ],
            }

        rows = [{"sector": j, "start": start, "end": end, "length": end - start + 1,
                 "open_ended": partition.open_ended and j == len(partition) - 1}
                for j, (start, end) in enumerate(partition.sectors)]
        self.core.write_table("sectors", rows,
                              ["sector", "start", "end", "length", "open_ended"])
        self.core.write_summary("resonances", payload)
        return {
            "plugin": self.name,
            "status": "completed",
            "regime": regime.value,
            "levels": rs.levels,
            "n_set": list(report.n_set),
            "degenerate": report.degenerate,
            "search": payload.get("search"),
        }

    async def analyze(self, data: Any) -> Dict[str, Any]:
        try:
            return await asyncio.to_thread(self._run, data or {})
        except Exception as e:
            self.logger.error(f"resonance analysis failed: {e}")
            return failure_result(self.name, e)
