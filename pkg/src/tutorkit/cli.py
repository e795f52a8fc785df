"""Command-line front end: serve, lint, index, chat, replay, gc."""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

import click

from .config import ProviderConfig, load_config
from .kb import ParseError, Severity, lint_directory, load_knowledge_base
from .retrieval import build_index
from .service import TutorService, create_app
from .sessions import SessionStore


def _echo_parse_error(exc: ParseError) -> None:
    for err in exc.errors or [exc]:
        where = f"{err.filename}:{err.line}" if err.filename else "-"
        click.echo(f"ERROR {err.code} {where} {err.message}", err=True)


def _build_config(config_path, **overrides):
    cleaned = {k: v for k, v in overrides.items() if v}
    return load_config(config_path, **cleaned)


@click.group()
def main() -> None:
    """Curriculum-grounded tutoring toolkit."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON config file.")
@click.option("--kb", "kb_dir", type=click.Path(exists=True, file_okay=False), default=None, help="Knowledge-base directory.")
@click.option("--data-dir", type=click.Path(file_okay=False), default=None, help="Session storage directory.")
@click.option("--listen", default=None, help="host:port to bind.")
@click.option("--scripted", is_flag=True, help="Use the offline scripted provider.")
def serve(config_path, kb_dir, data_dir, listen, scripted):
    """Run the HTTP/SSE tutoring service."""
    config = _build_config(
        config_path, kb_dir=kb_dir, data_dir=data_dir, listen_address=listen
    )
    if scripted:
        config.provider = ProviderConfig(kind="scripted")
    try:
        app = create_app(config=config)
    except ParseError as exc:
        _echo_parse_error(exc)
        raise SystemExit(1)

    import uvicorn

    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")


@main.group()
def kb() -> None:
    """Knowledge-base tools."""


@kb.command("lint")
@click.argument("kb_dir", type=click.Path(exists=True, file_okay=False))
def kb_lint(kb_dir):
    """Check module files; exits 1 when any Error-level finding exists."""
    reports = lint_directory(kb_dir)
    if not reports:
        click.echo("no module files found", err=True)
        raise SystemExit(1)
    had_error = False
    seen_ids: dict[str, str] = {}
    for filename, report in reports:
        for finding in report.findings:
            if finding.severity is Severity.ERROR:
                had_error = True
            click.echo(
                f"{finding.severity.value.upper()} {finding.code} "
                f"{filename}:{finding.line} {finding.message}"
            )
        first = seen_ids.setdefault(report.module_id, filename)
        if first != filename:
            had_error = True
            click.echo(
                f"ERROR DuplicateId {filename}:1 module id "
                f"'{report.module_id}' already used by {first}"
            )
    if had_error:
        raise SystemExit(1)
    click.echo(f"ok: {len(reports)} module file(s), no errors")


@kb.command("index")
@click.argument("kb_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default="index.json", show_default=True)
def kb_index(kb_dir, out_path):
    """Build the retrieval index and write its JSON dump."""
    try:
        base = load_knowledge_base(kb_dir)
    except ParseError as exc:
        _echo_parse_error(exc)
        raise SystemExit(1)
    index = build_index(base)
    Path(out_path).write_text(index.to_json(), encoding="utf-8")
    click.echo(
        f"wrote {out_path}: {index.segment_count} segments, "
        f"{len(index.postings)} terms"
    )


def _print_events(service: TutorService, session_id: str, module_id: str, message: str) -> None:
    for event in service.open_exchange(session_id, message, module_id):
        if event.name == "meta":
            data = event.data
            tags = ",".join(data["tags_used"])
            click.echo(
                f"[{data['intent']} -> {data['strategy']}; "
                f"tags={tags}; hint_level={data['hint_level']}]"
            )
        elif event.name == "token":
            click.echo(event.data["text"], nl=False)
        elif event.name == "done":
            click.echo()
        elif event.name == "error":
            click.echo(f"\n! {event.data['code']}: {event.data['message']}", err=True)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--kb", "kb_dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--data-dir", type=click.Path(file_okay=False), default=None)
@click.option("--module", "module_id", default=None, help="Module to start in; defaults to the first.")
@click.option("--scripted", is_flag=True, help="Use the offline scripted provider.")
def chat(config_path, kb_dir, data_dir, module_id, scripted):
    """Interactive terminal chat against the local pipeline."""
    config = _build_config(config_path, kb_dir=kb_dir, data_dir=data_dir)
    if scripted:
        config.provider = ProviderConfig(kind="scripted")
    try:
        service = TutorService(config)
    except ParseError as exc:
        _echo_parse_error(exc)
        raise SystemExit(1)
    session = service.create_session()
    module_id = module_id or service.kb.module_ids()[0]
    click.echo(f"session {session.id} | module {module_id}")
    click.echo("/module <id> switches modules, /quit exits")
    while True:
        try:
            message = click.prompt("you", prompt_suffix="> ")
        except (EOFError, click.exceptions.Abort):
            break
        stripped = message.strip()
        if stripped in ("/quit", "/exit"):
            break
        if stripped.startswith("/module"):
            candidate = stripped.split(None, 1)[1].strip() if " " in stripped else ""
            if candidate in service.kb.modules:
                module_id = candidate
                click.echo(f"switched to {module_id}")
            else:
                click.echo(f"unknown module; available: {', '.join(service.kb.module_ids())}")
            continue
        _print_events(service, session.id, module_id, message)
    click.echo("bye")


@main.command()
@click.argument("transcript", type=click.Path(exists=True, dir_okay=False))
@click.option("--kb", "kb_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--module", "module_id", default=None)
@click.option("--data-dir", type=click.Path(file_okay=False), default=None, help="Session storage; a temp dir when omitted.")
@click.option("--allow-solutions", is_flag=True, help="Permit gated solution release.")
def replay(transcript, kb_dir, module_id, data_dir, allow_solutions):
    """Re-run a recorded message list through the offline pipeline.

    The transcript is a JSON list of messages, or an object with
    "module_id" and "messages"; entries may be strings or objects with
    "message" and an optional per-entry "module_id".
    """
    raw = json.loads(Path(transcript).read_text(encoding="utf-8"))
    if isinstance(raw, dict):
        messages = raw.get("messages", [])
        module_id = module_id or raw.get("module_id")
    else:
        messages = raw
    config = _build_config(
        None,
        kb_dir=kb_dir,
        data_dir=data_dir or tempfile.mkdtemp(prefix="tutor-replay-"),
    )
    config.provider = ProviderConfig(kind="scripted")
    if allow_solutions:
        config.allow_solutions = True
    try:
        service = TutorService(config)
    except ParseError as exc:
        _echo_parse_error(exc)
        raise SystemExit(1)
    session = service.create_session()
    module_id = module_id or service.kb.module_ids()[0]
    for entry in messages:
        if isinstance(entry, dict):
            message = str(entry.get("message", ""))
            target = entry.get("module_id") or module_id
        else:
            message = str(entry)
            target = module_id
        click.echo(f"> {message}")
        _print_events(service, session.id, target, message)
        click.echo()


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--data-dir", type=click.Path(file_okay=False), default=None)
@click.option("--older-than", "older_than", type=float, required=True, help="Age threshold in days.")
def gc(config_path, data_dir, older_than):
    """Delete idle session logs older than the threshold."""
    config = _build_config(config_path, data_dir=data_dir)
    store = SessionStore(config.data_dir)
    removed = store.gc(older_than)
    click.echo(f"removed {removed} session(s)")


if __name__ == "__main__":
    main()
