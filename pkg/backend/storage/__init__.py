from .storage import (
    config_hash,
    git_describe,
    read_field,
    read_manifest,
    read_report,
    report_table,
    write_field,
    write_json,
    write_report,
)

__all__ = [
    "config_hash",
    "git_describe",
    "read_field",
    "read_manifest",
    "read_report",
    "report_table",
    "write_field",
    "write_json",
    "write_report",
]
