"""
Startup Banner Module
Figlet title in a rich panel, shown when the CLI runs on a terminal.
"""
import shutil

import pyfiglet
from rich import box
from rich.align import Align
from rich.console import Console
from rich.panel import Panel
from rich.text import Text

TITLE = "TEXDCN"
VERSION = "0.1.0"


def banner_panel(command: str, width: int) -> Panel:
    font = "small" if width < 80 else "standard" if width < 120 else "doom"
    content = Text()
    content.append(pyfiglet.figlet_format(TITLE, font=font), style="bold cyan")
    content.append("\n")
    content.append("Texture pattern discovery with deep clustering", style="italic white")
    content.append("\n")
    content.append("─" * 30, style="dim")
    content.append("\n")
    content.append(f"v{VERSION} • autoencoder + k-means • signatures • forest / LASSO", style="bold green")
    return Panel(
        Align.center(content),
        box=box.DOUBLE_EDGE,
        border_style="bright_magenta",
        subtitle=f"[bold blue] ▶ {command} [/bold blue]",
        width=min(width - 4, 100),
        padding=(1, 2),
    )


def print_banner(command: str = "") -> None:
    console = Console()
    if not console.is_terminal:
        return
    console.print(banner_panel(command, shutil.get_terminal_size().columns))
