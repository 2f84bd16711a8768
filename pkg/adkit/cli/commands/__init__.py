"""Command implementations."""

from adkit.cli.commands.evaluate import cmd_eval
from adkit.cli.commands.predict import cmd_predict
from adkit.cli.commands.train import cmd_train

__all__ = ["cmd_eval", "cmd_predict", "cmd_train"]
