"""Deterministic procedural generator for mixed-object counting scenes.

Seed-driven scene synthesis with pixel-exact annotations (boxes, instance
and class masks, depth, normals, exemplars, tiered text prompts) and an
evaluation harness for counting predictions.
"""

__version__ = "0.1.0"

GENERATOR_VERSION = __version__
