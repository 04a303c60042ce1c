import argparse

from .commands import bench, build, gen, query, verify
from .middleware import setup_middleware

commands_metadata = [
    {
        "name": "gen",
        "description": "Generate a random instance file",
    },
    {
        "name": "build",
        "description": "Build a reachability oracle file for an instance",
    },
    {
        "name": "query",
        "description": "Answer a query file against an oracle file",
    },
    {
        "name": "verify",
        "description": "Check an oracle against the brute-force closure",
    },
    {
        "name": "bench",
        "description": "Time oracle builds and queries over instance sizes",
    },
]

command_modules = {"gen": gen, "build": build, "query": query, "verify": verify, "bench": bench}

handlers = setup_middleware({name: module.run for name, module in command_modules.items()})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="txreach", description="Reachability structures for transmission graphs")
    parser.add_argument("--log-config", default=None, help="logging.yaml to load instead of the packaged one")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging for txreach")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for meta in commands_metadata:
        name = meta["name"]
        sub = subparsers.add_parser(name, help=meta["description"], description=meta["description"])
        command_modules[name].configure(sub)
        sub.set_defaults(handler=handlers[name])
    return parser
