"""Sub-task auto-planning."""

from .auto_planner import AutoPlanner, load_subtasks, save_subtasks, subtask_id_for

__all__ = ['AutoPlanner', 'load_subtasks', 'save_subtasks', 'subtask_id_for']
