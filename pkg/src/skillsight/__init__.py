"""Gaze-based skill assessment at desk scale.

Subpackages and modules:

- ``gaze_core``: gaze/recording data model, on-disk format, normalization,
  clip sampling.
- ``analysis``: fixation/saccade detection and expert-vs-novice gaze
  statistics.
- ``attention``: Gaussian gaze prior over the patch grid and the additive
  attention-logit bias.
- ``teacher`` / ``student``: the video+gaze teacher and the gaze-only
  distilled student.
- ``training``: training loops, evaluation protocol, checkpointing.
- ``power``: analytic MAC/byte accounting and the sensor+compute power model.
- ``synthdata``: deterministic synthetic recordings for end-to-end tests.
- ``cli``: the ``skillsight`` command-line entry point.
"""

__version__ = "0.1.0"
