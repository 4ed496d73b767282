"""Transient stability prediction with a swarm-optimized ELM."""

__version__ = "0.1.0"
