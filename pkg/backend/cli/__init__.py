from .app import COMMANDS, main, run

__all__ = ["COMMANDS", "main", "run"]
