"""
Smoke check of a running hjlab service.

Exercises the REST surface end to end:
1. Health check answers HEALTHY
2. The registry lists every experiment and filters by tag
3. Bad requests are rejected (unknown experiment, invalid override)
4. A queued run is executed by the Celery worker and stored as PASSED

Point it at a deployment with HJLAB_BASE_URL (default http://localhost:8000).
"""
import os
import sys
import time

import requests

BASE_URL = os.getenv("HJLAB_BASE_URL", "http://localhost:8000").rstrip("/")
EXPECTED_IDS = {
    "ex-5-1-dirichlet",
    "ex-5-1-perron",
    "ex-5-2",
    "ex-5-3",
    "ex-5-4",
    "ex-5-5",
    "ex-thm1-4",
    "ex-remark-4-2",
}
RUN_TIMEOUT = float(os.getenv("HJLAB_RUN_TIMEOUT", "300"))


def print_section(title):
    print("\n" + "=" * 70)
    print(f"  {title}")
    print("=" * 70)


def check_health():
    print_section("Health Check")
    response = requests.get(f"{BASE_URL}/", timeout=10)
    assert response.status_code == 200, f"Health check should return 200, got {response.status_code}"
    data = response.json()
    assert data["status"] == "HEALTHY", "Should return HEALTHY status"
    print(f"   Status: {data['status']} at {data['current_time']}")


def check_registry():
    print_section("Experiment Registry")
    response = requests.get(f"{BASE_URL}/v1/experiments", timeout=10)
    assert response.status_code == 200
    ids = {entry["id"] for entry in response.json()}
    missing = EXPECTED_IDS - ids
    assert not missing, f"Registry is missing {sorted(missing)}"
    print(f"   {len(ids)} experiments registered")

    response = requests.get(f"{BASE_URL}/v1/experiments", params={"tag": "ergodic"}, timeout=10)
    ergodic = {entry["id"] for entry in response.json()}
    assert ergodic == {"ex-5-1-dirichlet", "ex-5-1-perron", "ex-remark-4-2"}, f"Unexpected tag filter {ergodic}"
    print(f"   tag=ergodic -> {sorted(ergodic)}")


def check_rejections():
    print_section("Rejected Requests")
    response = requests.post(f"{BASE_URL}/v1/experiments/ex-does-not-exist/runs", json={}, timeout=10)
    assert response.status_code == 404, f"Unknown experiment should be 404, got {response.status_code}"
    print("   unknown experiment -> 404")

    response = requests.post(
        f"{BASE_URL}/v1/experiments/ex-5-2/runs", json={"overrides": {"cfl": 1.5}}, timeout=10
    )
    assert response.status_code == 400, f"cfl = 1.5 should be 400, got {response.status_code}"
    print(f"   cfl = 1.5 -> 400 {response.json()}")


def check_queued_run():
    print_section("Queued Run")
    start = time.time()
    response = requests.post(f"{BASE_URL}/v1/experiments/ex-5-1-perron/runs", json={}, timeout=10)
    assert response.status_code == 202, f"Run should be accepted, got {response.status_code}"
    run_id = response.json()["run_id"]
    print(f"   queued {run_id} in {(time.time() - start) * 1000:.0f}ms")

    status = None
    while time.time() - start < RUN_TIMEOUT:
        time.sleep(2)
        data = requests.get(f"{BASE_URL}/v1/runs/{run_id}", timeout=10).json()
        status = data["status"]
        if status not in ("QUEUED", "RUNNING"):
            break
        print(f"   ... {status} ({time.time() - start:.0f}s)")
    assert status == "PASSED", f"Run should pass, ended as {status}"
    for line in data["summary"]:
        print(f"   {line}")


def main():
    print(f"Verifying hjlab service at {BASE_URL}")
    try:
        check_health()
        check_registry()
        check_rejections()
        check_queued_run()
    except requests.exceptions.ConnectionError:
        print(f"\nError: could not connect to {BASE_URL}")
        sys.exit(1)
    except AssertionError as e:
        print(f"\nCheck failed: {e}")
        sys.exit(1)
    print_section("All checks passed")


if __name__ == "__main__":
    main()
