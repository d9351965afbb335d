#!/usr/bin/env python3
"""Builds the embedded unigram word list from wordninja's frequency-ranked
English list plus a supplement of log vocabulary.

usage: make_unigram_table.py wordninja_words.txt.gz > data/unigram_words.txt
"""
import gzip
import re
import sys

TOP_WORDS = 30000
SUPPLEMENT_RANK = 500
SUPPLEMENT = """
interface eth vlan dfs hdfs blk kernel datanode namenode responder packet
ipv tcp udp http https ssh dns dhcp cpu ram disk raid nfs yarn jvm rpc api
url uri src dst addr config cfg init sys proc pid uid gid tid ack syn mtu
mac lan wan ifindex ospf bgp mpls qos acl snmp ntp syslog err warn info
debug trace fatal ctx mgr svc srv msg buf len num idx tmp usr dev eth
iface netmask gateway hostname localhost daemon cron systemd sshd su sudo
rx tx nic lun ssd hdd vm vms hypervisor container pod ldap kerberos auth
token timeout heartbeat failover replica shard zookeeper hadoop mapreduce
flush allocate abort deadlock terminate bogus stale degrade mismatch
""".split()


def main():
    words = []
    seen = set()
    with gzip.open(sys.argv[1], "rt") as f:
        for line in f:
            w = line.strip()
            if not re.fullmatch(r"[a-z]+", w):
                continue
            if len(w) == 1 and w not in ("a", "i"):
                continue
            if w in seen:
                continue
            seen.add(w)
            words.append(w)
            if len(words) >= TOP_WORDS:
                break
    extra = []
    for w in SUPPLEMENT:
        if w in extra:
            continue
        if w in seen:
            words.remove(w)
        extra.append(w)
    words[SUPPLEMENT_RANK:SUPPLEMENT_RANK] = extra
    sys.stdout.write("\n".join(words) + "\n")


if __name__ == "__main__":
    main()
