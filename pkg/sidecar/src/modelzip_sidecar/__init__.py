"""Reference probability provider for the modelzip wire protocol."""

from .server import Server, SidecarConfig, serve

__version__ = "0.1.0"
