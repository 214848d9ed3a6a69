"""Built-in event notification system: publish/subscribe clients and
servers over a fragile mobile network, written in the specification
language itself.

Protocol summary.  Clients attach to whichever server the environment makes
reachable (the interaction assigns new_server), register with R, subscribe
with S, and exchange P/Q/U/D updates; every request is answered with a
Y or N reply.  On migration the client sends H to the new server; the new
server registers the client, replies (R, Y), and asks the old server to
forward.  The old server marks the client as moved, re-addresses that
client's undelivered messages to the new server (wrapped as M with the
original recipient inside) and transfers its subscriptions per topic; the
new server unwraps and relays.  No message is lost or duplicated in the
process.

Clients process their interface strictly at the head and therefore block
while the head is unsendable; servers move incoming traffic to an in-queue
and attempt every outgoing interface slot independently, so one unreachable
recipient never delays the others.
"""
from __future__ import annotations

from .nodes import SystemDef
from .parser import parse_system

CLIENT_TEMPLATE = """
Program client(i)
declare
     interface : queue of message
  || server_addr : address
  || new_server : address
  || in : queue of message
  || out : queue of message
  || registered : boolean
  || subscribed : boolean
  || unsubscribe : boolean
  || update_add : boolean
  || update_del : boolean
  || deregister : boolean
  || content : integer
  || msg_stats : integer
  || tag : array[__NT__] of integer
always
     server = ite(server_addr = null, new_server, server_addr)
  || self = self_addr
initially
     interface = null
  || server_addr = null
assign
priority 2:
  {{ update location }}
     relocate :: lambda := update(lambda)
  {{ receive messages from interface }}
  || receive :: interface, in := tail(interface), in ++ head(interface)
       if interface != null and head(interface).destination = self
          and head(interface).type = #M
  {{ transmit head of interface; blocks while the head is unsendable }}
  || transmit :: head(interface).status := send(head(interface))
       if interface != null and not head(interface).status
          and head(interface).destination != self
  {{ registering with a new server: handoff }}
  || handoff :: interface := interface ++
       msg(false, self_addr, new_server, #H, (msg_stats, server_addr))
       if registered and new_server != server_addr
          and not member(msg(false, self_addr, new_server, #H,
                             (msg_stats, server_addr)), interface)
  {{ take pending requests along: re-target unsent messages still addressed
     to the server being left, so they cannot wedge the head of the queue }}
  || rehome :: <[] k : 0 <= k < length(interface) ::
       at(interface, k).destination := new_server
       if at(interface, k) != null and not at(interface, k).status
          and at(interface, k).destination = server_addr
          and registered and new_server != server_addr >
  {{ drop rejected-request replies }}
  || drop_rejected :: interface := tail(interface)
       if interface != null and head(interface).reply = #N
priority 1:
  {{ clear sent message from interface }}
     clear_sent :: interface := tail(interface)
       if interface != null and head(interface).status
  {{ register with the reachable server }}
  || register :: interface := interface ++
       msg(false, self_addr, server, #R, content)
       if not registered and can_send(self, server)
          and not member(msg(false, self_addr, server, #R, content),
                         interface)
  {{ adopt the replying server and set the registered flag }}
  || ack_register :: registered, server_addr, interface :=
       true, head(interface).source, tail(interface)
       if interface != null and head(interface).type = #R
          and head(interface).reply = #Y
  {{ subscribe }}
  || subscribe :: out := out ++
       msg(false, self_addr, server_addr, #S, content)
       if registered and not subscribed
          and not member(msg(false, self_addr, server_addr, #S, content), out)
          and not member(msg(false, self_addr, server_addr, #S, content),
                         interface)
  {{ set the subscribed flag }}
  || ack_subscribe :: subscribed, interface := true, tail(interface)
       if interface != null and head(interface).type = #S
          and head(interface).reply = #Y
  {{ unsubscribe }}
  || unsubscribe_req :: out := out ++
       msg(false, self_addr, server_addr, #U, content)
       if unsubscribe
          and not member(msg(false, self_addr, server_addr, #U, content), out)
          and not member(msg(false, self_addr, server_addr, #U, content),
                         interface)
  {{ reset the unsubscribe flag }}
  || ack_unsubscribe :: unsubscribe, interface := false, tail(interface)
       if interface != null and head(interface).type = #U
          and head(interface).reply = #Y
  {{ update subscription: add }}
  || sub_add :: out := out ++
       msg(false, self_addr, server_addr, #P, content)
       if subscribed and update_add
          and not member(msg(false, self_addr, server_addr, #P, content), out)
          and not member(msg(false, self_addr, server_addr, #P, content),
                         interface)
  {{ update subscription: delete }}
  || sub_del :: out := out ++
       msg(false, self_addr, server_addr, #Q, content)
       if subscribed and update_del
          and not member(msg(false, self_addr, server_addr, #Q, content), out)
          and not member(msg(false, self_addr, server_addr, #Q, content),
                         interface)
  {{ reset the update-add flag }}
  || ack_sub_add :: update_add, interface := false, tail(interface)
       if interface != null and head(interface).type = #P
          and head(interface).reply = #Y
  {{ reset the update-delete flag }}
  || ack_sub_del :: update_del, interface := false, tail(interface)
       if interface != null and head(interface).type = #Q
          and head(interface).reply = #Y
  {{ de-register: voluntary }}
  || dereg :: out := out ++
       msg(false, self_addr, server_addr, #D, content)
       if deregister
          and not member(msg(false, self_addr, server_addr, #D, content), out)
          and not member(msg(false, self_addr, server_addr, #D, content),
                         interface)
  {{ reset the de-register flag; the registration is gone server-side }}
  || ack_dereg :: deregister, registered, interface :=
       false, false, tail(interface)
       if interface != null and head(interface).type = #D
          and head(interface).reply = #Y
  {{ transfer messages from out queue to interface }}
  || flush_out :: interface, out := interface ++ head(out), tail(out)
       if out != null
  {{ handle messages on in queue }}
  || consume_in :: tag[head(in).content.msg_type], in :=
       head(in).content.tag, tail(in)
       if in != null
end
"""

SERVER_TEMPLATE = """
Program server(j)
declare
     interface : queue of message
  || in : queue of message
  || out : queue of message
  || registered_clients : queue of address
  || subscr : array[__NT__] of queue of address
  || fwd : array[__NINST__] of address
always
     self = self_addr
initially
     interface = null
assign
priority 2:
  {{ move addressed messages from interface to the in queue }}
     receive :: <[] k : 0 <= k < length(interface) ::
       in, interface := in ++ at(interface, k),
                        delete(interface, at(interface, k))
       if at(interface, k) != null and at(interface, k).destination = self >
  {{ register clients }}
  || register :: registered_clients, fwd[index_of(head(in).source)], out, in :=
       ite(member(head(in).source, registered_clients),
           registered_clients, registered_clients ++ head(in).source),
       null,
       out ++ msg(false, self_addr, head(in).source, #R, #Y, head(in).content),
       tail(in)
       if in != null and head(in).type = #R
  {{ de-registering clients }}
  || dereg :: registered_clients, out, in :=
       delete(registered_clients, head(in).source),
       out ++ msg(false, self_addr, head(in).source, #D, #Y, head(in).content),
       tail(in)
       if in != null and head(in).type = #D
  {{ handoff: treat H as registration and ask the old server to forward }}
  || handoff_reg :: registered_clients, fwd[index_of(head(in).source)], out, in :=
       ite(member(head(in).source, registered_clients),
           registered_clients, registered_clients ++ head(in).source),
       null,
       ite(at(head(in).content, 1) = null,
           out ++ msg(false, self_addr, head(in).source, #R, #Y, null),
           out ++ msg(false, self_addr, head(in).source, #R, #Y, null)
               ++ msg(false, self_addr, at(head(in).content, 1), #H,
                      head(in).source)),
       tail(in)
       if in != null and head(in).type = #H and is_seq(head(in).content)
  {{ forward request from the new server: mark the client as moved }}
  || handoff_fwd :: registered_clients, fwd[index_of(head(in).content)], in :=
       delete(registered_clients, head(in).content),
       head(in).source,
       tail(in)
       if in != null and head(in).type = #H and not is_seq(head(in).content)
  {{ transmit all unsent interface messages independently }}
  || transmit :: <[] k : 0 <= k < length(interface) ::
       at(interface, k).status := send(at(interface, k))
       if at(interface, k) != null and not at(interface, k).status
          and at(interface, k).destination != self >
priority 1:
  {{ subscribe; N-reply when the client is not registered }}
     subscribe :: subscr[head(in).content], out, in :=
       ite(member(head(in).source, registered_clients)
               and not member(head(in).source, subscr[head(in).content]),
           subscr[head(in).content] ++ head(in).source,
           subscr[head(in).content]),
       out ++ ite(member(head(in).source, registered_clients),
                  msg(false, self_addr, head(in).source, #S, #Y,
                      head(in).content),
                  msg(false, self_addr, head(in).source, #S, #N,
                      head(in).content)),
       tail(in)
       if in != null and head(in).type = #S
  {{ unsubscribe }}
  || unsubscribe :: subscr[head(in).content], out, in :=
       delete(subscr[head(in).content], head(in).source),
       out ++ msg(false, self_addr, head(in).source, #U, #Y, head(in).content),
       tail(in)
       if in != null and head(in).type = #U
  {{ update subscription: add }}
  || sub_add :: subscr[head(in).content], out, in :=
       ite(member(head(in).source, registered_clients)
               and not member(head(in).source, subscr[head(in).content]),
           subscr[head(in).content] ++ head(in).source,
           subscr[head(in).content]),
       out ++ ite(member(head(in).source, registered_clients),
                  msg(false, self_addr, head(in).source, #P, #Y,
                      head(in).content),
                  msg(false, self_addr, head(in).source, #P, #N,
                      head(in).content)),
       tail(in)
       if in != null and head(in).type = #P and not is_seq(head(in).content)
  {{ update subscription: add transferred from the old server }}
  || sub_add_fwd :: subscr[at(head(in).content, 1)], in :=
       ite(member(at(head(in).content, 0), subscr[at(head(in).content, 1)]),
           subscr[at(head(in).content, 1)],
           subscr[at(head(in).content, 1)] ++ at(head(in).content, 0)),
       tail(in)
       if in != null and head(in).type = #P and is_seq(head(in).content)
  {{ update subscription: delete }}
  || sub_del :: subscr[head(in).content], out, in :=
       delete(subscr[head(in).content], head(in).source),
       out ++ msg(false, self_addr, head(in).source, #Q, #Y, head(in).content),
       tail(in)
       if in != null and head(in).type = #Q
  {{ re-address undelivered messages of moved clients to their new server }}
  || readdress :: <[] k : 0 <= k < length(interface) ::
       at(interface, k) := msg(false, self_addr,
                               fwd[index_of(at(interface, k).destination)],
                               #M, at(interface, k))
       if at(interface, k) != null and not at(interface, k).status
          and at(interface, k).destination != self
          and fwd[index_of(at(interface, k).destination)] != null >
  {{ transfer subscriptions of moved clients, one topic at a time }}
  || sub_fwd :: <[] t : 0 <= t < __NT__, k : 0 <= k < length(subscr[t]) ::
       subscr[t], out :=
       delete(subscr[t], at(subscr[t], k)),
       out ++ msg(false, self_addr, fwd[index_of(at(subscr[t], k))], #P,
                  (at(subscr[t], k), t))
       if fwd[index_of(at(subscr[t], k))] != null >
  {{ relay re-addressed messages: unwrap and take over as the sender, so
     delivery depends on this server's connectivity, not the old one's }}
  || relay :: out, in :=
       out ++ ite(head(in).content.reply = null,
                  msg(false, self_addr, head(in).content.destination,
                      head(in).content.type, head(in).content.content),
                  msg(false, self_addr, head(in).content.destination,
                      head(in).content.type, head(in).content.reply,
                      head(in).content.content)),
       tail(in)
       if in != null and head(in).type = #M
  {{ transfer messages from out queue to interface }}
  || flush_out :: interface, out := interface ++ head(out), tail(out)
       if out != null
  {{ make sent messages null on interface }}
  || null_sent :: <[] k : 0 <= k < length(interface) ::
       at(interface, k) := null
       if at(interface, k) != null and at(interface, k).status >
  {{ remove null messages from head of interface }}
  || pop_null :: interface := tail(interface)
       if interface != null and head(interface) = null
end
"""


def render_ens_system(num_clients: int, num_servers: int,
                      num_topics: int = 2) -> str:
    """Concrete-syntax text of the composed system."""
    if num_clients < 1 or num_servers < 1:
        raise ValueError("an ens system needs at least one client and one "
                         "server")
    if num_topics < 1:
        raise ValueError("an ens system needs at least one topic")
    ninst = num_clients + num_servers
    components = []
    for i in range(num_clients):
        components.append(f"client({i}) at @start_{i}")
    for j in range(num_servers):
        components.append(f"server({j}) at @cell_{j}")
    comp_text = "\n  || ".join(components)

    def fill(template: str) -> str:
        return (template.replace("{{", "{").replace("}}", "}")
                .replace("__NT__", str(num_topics))
                .replace("__NINST__", str(ninst)))

    lines = [
        f"System ens_{num_clients}x{num_servers}",
        fill(CLIENT_TEMPLATE),
        fill(SERVER_TEMPLATE),
        "Components",
        "     " + comp_text,
        "",
        "Interactions",
        f"  <[] i : 0 <= i < {num_clients}, j : 0 <= j < {num_servers} ::",
        "     attach :: client(i).new_server := server(j)",
        "       if can_send(server(j), client(i))",
        "  >",
        "end",
    ]
    return "\n".join(lines)


def build_ens_system(num_clients: int, num_servers: int,
                     num_topics: int = 2) -> SystemDef:
    """Parsed system with the given population; clients attach to whichever
    server can currently reach them."""
    return parse_system(render_ens_system(num_clients, num_servers,
                                          num_topics))
