"""Core: configuration, constants, errors, flop accounting, state."""
