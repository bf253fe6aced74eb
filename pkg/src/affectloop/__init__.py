"""Real-time affective learning feedback engine.

Converts streams of wearable physiological samples into per-student
valence/arousal estimates and learning emotions, aggregates them into a
collective classroom state, and runs an MDP value-iteration controller
that suggests teaching-pace and content actions, with a closed-loop
simulator for desk-scale evaluation.
"""

__version__ = "0.1.0"
