"""Parallel execution of independent computations."""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import Any

from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn, TimeElapsedColumn

logger = logging.getLogger(__name__)


class ParallelExecutor:
    """Run independent tasks on a thread pool, returning results in submission order.

    numpy and scipy release the GIL inside their dense kernels, so threads
    are enough to overlap eigendecompositions and matrix products.
    """

    def __init__(self, max_workers: int = 1, console: Console | None = None, show_progress: bool = False) -> None:
        """
        Initialize parallel executor.

        Args:
            max_workers: Maximum number of worker threads (default: 1)
            console: Console used for progress output
            show_progress: Render a spinner per task
        """
        if max_workers < 1:
            raise ValueError(f"max_workers must be >= 1, got {max_workers}")
        self.max_workers = max_workers
        self.console = console or Console(stderr=True)
        self.show_progress = show_progress

    def run(
        self,
        tasks: list[Callable[[], Any]],
        descriptions: list[str],
    ) -> list[Any]:
        """
        Run tasks and collect their results.

        A failing task contributes its exception to the result list so that
        the remaining tasks still finish.

        Args:
            tasks: Zero-argument callables
            descriptions: One label per task

        Returns:
            Results (or exceptions) in the order of ``tasks``
        """
        if len(tasks) != len(descriptions):
            raise ValueError("Number of tasks must match number of descriptions")

        results: list[Any] = []
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            TimeElapsedColumn(),
            console=self.console,
            disable=not self.show_progress,
            transient=True,
        ) as progress:
            task_ids = [progress.add_task(desc, total=None) for desc in descriptions]
            with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                futures = [executor.submit(task) for task in tasks]
                for i, future in enumerate(futures):
                    try:
                        results.append(future.result())
                        progress.update(task_ids[i], description=f"[green]✓ {descriptions[i]}[/green]")
                    except Exception as e:
                        logger.debug("task %s failed: %s", descriptions[i], e)
                        results.append(e)
                        progress.update(task_ids[i], description=f"[red]✗ {descriptions[i]}[/red]")
        return results

    def filter_results(self, results: list[Any], raise_errors: bool = False) -> list[Any]:
        """
        Drop exceptions from a result list.

        Args:
            results: Output of :meth:`run`
            raise_errors: If True, raise the first exception found instead
        """
        if raise_errors:
            for result in results:
                if isinstance(result, Exception):
                    raise result
        return [r for r in results if not isinstance(r, Exception)]

    def get_errors(self, results: list[Any]) -> list[Exception]:
        return [r for r in results if isinstance(r, Exception)]

    def print_summary(self, results: list[Any], descriptions: list[str]) -> None:
        successful = len(self.filter_results(results))
        failed = self.get_errors(results)
        self.console.print(f"[green]Completed: {successful}[/green]")
        if failed:
            self.console.print(f"[red]Failed: {len(failed)}[/red]")
            for desc, result in zip(descriptions, results, strict=True):
                if isinstance(result, Exception):
                    self.console.print(f"  • {desc}: {result}")

    def __repr__(self) -> str:
        """Return string representation."""
        return f"ParallelExecutor(max_workers={self.max_workers})"
