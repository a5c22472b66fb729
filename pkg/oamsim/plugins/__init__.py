"""
OAMSIM Plugins Module
One analysis plugin per CLI subcommand
"""

from ..core import AnalysisPlugin, PluginInterface

# Plugin registry, in the order `oamsim` lists its subcommands
AVAILABLE_PLUGINS = [
    "resonances_plugin",
    "simulation_plugin",
    "channel_plugin",
    "outcomes_plugin",
    "wasserstein_plugin",
    "verification_plugin",
]

# Plugin metadata
PLUGIN_METADATA = {
    "resonances_plugin": {
        "name": "Resonances",
        "command": "resonances",
        "category": "Arithmetic",
        "description": "Resonant levels, sector partition and degenerate set",
        "outputs": ["resonances.json", "sectors.csv"],
    },
    "simulation_plugin": {
        "name": "Simulation",
        "command": "simulate",
        "category": "Trajectories",
        "description": "Quantum trajectory ensembles or the classical birth-death chain",
        "outputs": ["simulate.json", "trajectories.csv", "classical.csv",
                    "classical_steps.csv"],
    },
    "channel_plugin": {
        "name": "Channel",
        "command": "channel",
        "category": "Ensemble",
        "description": "Iterates the averaged channel toward its limit state",
        "outputs": ["channel.json", "channel.csv"],
    },
    "outcomes_plugin": {
        "name": "Outcomes",
        "command": "outcomes",
        "category": "Ensemble",
        "description": "Exact outcome laws and their total-variation mixing",
        "outputs": ["outcomes.json", "outcomes.csv"],
    },
    "wasserstein_plugin": {
        "name": "Wasserstein",
        "command": "wasserstein",
        "category": "Trajectories",
        "description": "W1 distance between the empirical state law and its invariant measure",
        "outputs": ["wasserstein.json", "wasserstein.csv"],
    },
    "verification_plugin": {
        "name": "Verification",
        "command": "verify",
        "category": "Acceptance",
        "description": "Runs the property suite and reports every check",
        "outputs": ["verify.json", "verify.csv"],
    },
}


def get_available_plugins():
    """Get list of available plugins"""
    return AVAILABLE_PLUGINS


def get_plugin_metadata(plugin_name=None):
    """Get metadata for plugins"""
    if plugin_name:
        return PLUGIN_METADATA.get(plugin_name)
    return PLUGIN_METADATA


def plugin_for_command(command):
    """Plugin module name behind a CLI subcommand"""
    for plugin_name, metadata in PLUGIN_METADATA.items():
        if metadata["command"] == command:
            return plugin_name
    return None


__all__ = [
    "PluginInterface",
    "AnalysisPlugin",
    "AVAILABLE_PLUGINS",
    "PLUGIN_METADATA",
    "get_available_plugins",
    "get_plugin_metadata",
    "plugin_for_command",
]
