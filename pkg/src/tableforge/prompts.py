"""Prompt constants and builders for the table-editing chat calls.

The operation instructions and the wrapper template are fixed strings;
tests compare them byte for byte, so do not reflow or "fix" them (the
wrapper's "json-formated" spelling is intentional).
"""

from __future__ import annotations

SYSTEM_PROMPT = (
    "You are a data scientist/analyst who edits tabular data every day."
)

CONCAT_OPERATION = (
    "Make up two new columns with reasonable and diverse values. "
    "Specifically, each row in cell data should have one more element, "
    "and the length of column names should increase by one. You can make "
    "up data as long as the values look reasonable."
)

EDIT_OPERATION = (
    "Create a new column completely based on one or more existing columns. "
    "Some options are but not limited to: binning, string operation based "
    "on regular expression, information extraction, information "
    "refinement, etc. After the operation, each row in cell data should "
    "have one more element, and the length of column names should "
    "increase by one."
)

CALC_OPERATION = (
    "Create a new column completely based on one or more existing "
    "numerical columns using a type of calculation (mathematical "
    "calculations, aggregations, allocations, etc.). After the "
    "calculation, each row in cell data should have one more element, and "
    "the length of column names should increase by one."
)

UPDATE_OPERATION = (
    "Update title, column names, and description to match the updated "
    "cell data."
)

EDIT_TEMPLATE = (
    "{table}\n"
    "\n"
    "Your mission is to edit the json-formated tabular datapoint shown "
    "above and output the modified table in the exact same format.\n"
    "\n"
    "Edit the tabular data with following operations:\n"
    "\n"
    "{operation}\n"
    "\n"
    "Your output must only be a JSON object, do not explain yourself or "
    "output anything else. Again, do not explain yourself or output "
    "anything else."
)

DESCRIPTION_TEMPLATE = (
    "{table}\n"
    "\n"
    "Write a brief description of the json-formated tabular datapoint "
    "shown above: what the table contains and what it could be used for. "
    "At most 2 sentences.\n"
    "\n"
    "Your output must only be the description text, do not explain "
    "yourself or output anything else."
)


def build_edit_prompt(serialized_table: str, operation: str) -> str:
    """Wrap a serialized table and one operation instruction."""
    return EDIT_TEMPLATE.format(table=serialized_table, operation=operation)


def build_description_prompt(serialized_table: str) -> str:
    """Build the prompt asking for a short table description."""
    return DESCRIPTION_TEMPLATE.format(table=serialized_table)
