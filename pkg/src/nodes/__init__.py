"""Nodes for the training LangGraph workflow."""

from src.nodes.train_epoch import train_epoch
from src.nodes.refresh_store import refresh_store
from src.nodes.validate import validate

__all__ = [
    "train_epoch",
    "refresh_store",
    "validate"
]
