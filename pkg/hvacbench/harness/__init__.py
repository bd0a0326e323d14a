from hvacbench.harness.simulate import EpisodeController, EpisodeResult, run_episode

__all__ = ["EpisodeController", "EpisodeResult", "run_episode"]
