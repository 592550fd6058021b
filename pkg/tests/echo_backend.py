'''
Line-protocol test backend: answers every {"id", "prompt"} line with
{"id", "output"} where output is the prompt. With --reverse the answers
come back in reverse order.
'''
import json
import sys


def main():
    sys.stdin.reconfigure(encoding="utf-8")
    sys.stdout.reconfigure(encoding="utf-8")
    requests = [json.loads(line) for line in sys.stdin if line.strip()]
    if "--reverse" in sys.argv:
        requests.reverse()
    for request in requests:
        sys.stdout.write(json.dumps({"id": request["id"], "output": request["prompt"]}, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
