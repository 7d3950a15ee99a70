"""PRISM pipeline stages: a supervisor orchestrating one worker package per step."""
