#!/usr/bin/env python3
"""Builds the red-team-like replay fixture from a generated network.

Usage: make_redteam_fixture.py NETWORK_JSON OUT_DIR

Edits applied to the generated network:
  * the foothold host loses its access history (no recent users, nobody lists
    it in accessed_hosts) and carries no exploits;
  * the foothold user loses its history too, keeps privilege 0, and gets
    access to the foothold's subnet only;
  * the second host sits on a subnet the foothold user cannot reach and has a
    CredentialHarvest exploit whose only recent user is a "bridge" user;
  * the third host is a server on a fresh subnet that the bridge user can
    reach at the highest privilege it holds.

The sequence names the foothold user, so replay runs with credentials.
"""

import json
import sys
from pathlib import Path


def drop_history(net, host_id=None, user_id=None):
    for u in net["users"]:
        if host_id is not None and host_id in u["accessed_hosts"]:
            u["accessed_hosts"].remove(host_id)
        if user_id is not None and u["id"] == user_id:
            for h in u["accessed_hosts"]:
                net["hosts"][h]["recent_users"].remove(user_id)
            u["accessed_hosts"] = []
    if host_id is not None:
        net["hosts"][host_id]["recent_users"] = []


def main():
    src, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    net = json.loads(src.read_text())
    hosts, users = net["hosts"], net["users"]

    foothold = next(h for h in hosts
                    if h["required_privilege"] == 0 and h["host_type"] == "Workstation")
    drop_history(net, host_id=foothold["id"])
    foothold["exploits"] = []

    user = next(u for u in users if u["privilege_level"] == 0)
    drop_history(net, user_id=user["id"])
    user["accessible_subnets"] = [foothold["subnet"]]

    def reachable(u, h):
        return (h["subnet"] in u["accessible_subnets"]
                and u["privilege_level"] >= h["required_privilege"])

    # Bridge user: admin-level, reaches at least two subnets other than the
    # foothold's, so it can account for the second and third hosts.
    bridge = next(u for u in users
                  if u["id"] != user["id"] and u["privilege_level"] >= 1
                  and len([s for s in u["accessible_subnets"]
                           if s != foothold["subnet"]]) >= 2)
    other = [s for s in bridge["accessible_subnets"] if s != foothold["subnet"]]

    second = next(h for h in hosts
                  if h["subnet"] == other[0] and h["id"] != foothold["id"]
                  and reachable(bridge, h))
    for u in users:
        if second["id"] in u["accessed_hosts"]:
            u["accessed_hosts"].remove(second["id"])
    second["recent_users"] = [bridge["id"]]
    bridge["accessed_hosts"] = sorted(set(bridge["accessed_hosts"]) | {second["id"]})
    second["exploits"] = ["CredentialHarvest"]

    third = max((h for h in hosts
                 if h["subnet"] == other[1] and reachable(bridge, h)
                 and h["host_type"] != "Workstation"),
                key=lambda h: (h["required_privilege"], -h["id"]))

    for h in hosts:
        h["recent_users"].sort()

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "redteam_network.json").write_text(json.dumps(net, sort_keys=True) + "\n")
    sequence = {
        "network": "redteam_network.json",
        "source": "synthetic red-team-like trace: placed on a host and account "
                  "with no access history, then a move the foothold account "
                  "cannot make, then a harvested admin account",
        "sequence": [
            {"host": foothold["id"], "user": user["id"]},
            {"host": second["id"]},
            {"host": third["id"], "user": bridge["id"]},
        ],
    }
    (out_dir / "redteam_sequence.json").write_text(json.dumps(sequence, indent=2) + "\n")
    print(f"foothold {foothold['id']} user {user['id']} second {second['id']} "
          f"bridge {bridge['id']} third {third['id']}")


if __name__ == "__main__":
    main()
