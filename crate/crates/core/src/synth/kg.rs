//! The committed toy knowledge graph: a software-support domain around a
//! messaging app, sized for desk-scale experiments. Entities carry wide
//! alias pools on purpose: surface variety is what separates models that
//! normalize through the graph from models that only see tokens.

use crate::kg::{Entity, EntityId, KnowledgeGraph, RelationKind, Triple};

/// (id, canonical, aliases)
const OBJECTS: &[(u32, &str, &[&str])] = &[
    (1, "WeChat", &["wechat", "weixin"]),
    (2, "friend", &["friends", "buddy", "buddies", "pal", "pals", "mate", "mates"]),
    (
        3,
        "chat log",
        &["chat logs", "chat history", "chat record", "chat records", "conversation history", "conversation log", "message history"],
    ),
    (4, "account", &["accounts", "user account"]),
    (5, "password", &["passwords", "passcode", "pwd", "login password", "secret code"]),
    (6, "Moments", &["moments feed", "moments page", "timeline"]),
    (7, "group", &["groups", "group chat", "group chats", "chat group", "group conversation"]),
    (8, "message", &["messages", "text message", "text messages", "texts", "text"]),
    (9, "picture", &["pictures", "photo", "photos", "pic", "pics", "image", "images", "snapshot", "snapshots"]),
    (10, "video", &["videos", "video clip", "video clips", "clip", "recording", "recordings"]),
    (11, "wallet", &["wallets"]),
    (12, "payment", &["payments", "transaction", "transactions"]),
    (13, "sticker", &["stickers", "sticker set", "sticker pack"]),
    (14, "notification", &["notifications", "alert", "alerts", "reminder", "reminders"]),
    (15, "administrator", &["administrators", "admin", "admins", "group admin"]),
    (16, "nickname", &["nicknames", "display name", "screen name"]),
    (17, "QR code", &["qr codes", "qr"]),
    (18, "voice message", &["voice messages", "voice note", "voice notes", "audio message", "voice clip"]),
    (19, "emoji", &["emojis", "emoticon", "emoticons", "smiley", "smileys"]),
    (20, "file", &["files", "document", "documents", "attachment", "attachments", "doc", "docs"]),
    (21, "contact", &["contacts", "contact person"]),
    (22, "msg", &["msgs"]),
    (23, "avatar", &["avatars"]),
    (24, "profile photo", &["profile picture", "profile pic"]),
    (25, "group notice", &["group announcement", "group notices", "announcement"]),
];

/// (id, canonical, extra base forms, past forms). The alias list of the
/// entity is bases + pasts; generators use bases in request frames and
/// pasts in context clauses.
const OPERATIONS: &[(u32, &str, &[&str], &[&str])] = &[
    (30, "delete", &["erase", "wipe", "discard"], &["deleted", "erased", "wiped", "discarded"]),
    (31, "recover", &["retrieve", "get back", "reclaim"], &["recovered", "retrieved", "got back", "reclaimed"]),
    (32, "add", &[], &["added"]),
    (33, "block", &["blacklist", "ban"], &["blocked", "blacklisted", "banned"]),
    (34, "unblock", &[], &["unblocked"]),
    (35, "change", &["switch", "alter"], &["changed", "switched", "altered"]),
    (36, "send", &["share", "deliver"], &["sent", "shared", "delivered"]),
    (37, "save", &["keep", "store"], &["saved", "kept", "stored"]),
    (38, "forward", &[], &["forwarded"]),
    (39, "mute", &["silence"], &["muted", "silenced"]),
    (40, "unsend", &[], &["unsent"]),
    (41, "export", &[], &["exported"]),
    (42, "clear", &["empty", "purge"], &["cleared", "emptied", "purged"]),
    (43, "log in", &["login", "sign in"], &["logged in", "signed in"]),
    (44, "log out", &["logout", "sign out"], &["logged out", "signed out"]),
    (45, "set up", &["setup", "configure"], &["configured"]),
    (46, "transfer", &[], &["transferred"]),
    (47, "hide", &[], &["hidden", "hid"]),
    (48, "pin", &[], &["pinned"]),
    (49, "report", &[], &["reported"]),
    (50, "remove", &[], &["removed"]),
    (51, "restore", &["bring back"], &["restored", "brought back"]),
    (52, "modify", &["edit"], &["modified", "edited"]),
    (53, "recall", &["withdraw"], &["recalled", "withdrawn"]),
    (54, "reset", &[], &["reset"]),
    (55, "update", &["upgrade", "refresh"], &["updated", "upgraded", "refreshed"]),
    (56, "download", &["fetch"], &["downloaded", "fetched"]),
    (57, "verify", &["validate"], &["verified", "validated"]),
    (58, "create", &["make", "build"], &["created", "made", "built"]),
    (59, "exit", &["quit", "leave"], &["exited", "left"]),
    (60, "top up", &["recharge"], &["topped up", "recharged"]),
    (61, "backup", &["back up"], &["backed up"]),
];

/// (part, whole)
const COMPONENT_EDGES: &[(u32, u32)] = &[
    (2, 1),
    (3, 1),
    (4, 1),
    (6, 1),
    (7, 1),
    (11, 1),
    (14, 1),
    (17, 1),
    (5, 4),
    (16, 4),
    (24, 4),
    (8, 3),
    (20, 3),
    (18, 8),
    (13, 8),
    (19, 8),
    (9, 6),
    (10, 6),
    (12, 11),
    (15, 7),
    (25, 7),
];

const SYNONYM_EDGES: &[(u32, u32)] = &[
    (21, 2),  // contact = friend
    (22, 8),  // msg = message
    (23, 24), // avatar = profile photo
    (50, 30), // remove = delete
    (51, 31), // restore = recover
    (52, 35), // modify = change
    (53, 40), // recall = unsend
];

const HYPERNYM_EDGES: &[(u32, u32)] = &[(9, 20), (10, 20), (17, 9), (24, 9)];

/// (object, operation)
const OPERATION_EDGES: &[(u32, u32)] = &[
    // friend
    (2, 30),
    (2, 31),
    (2, 32),
    (2, 33),
    (2, 34),
    (2, 49),
    (2, 47),
    // WeChat itself supports the generic operations too, which is what makes
    // the part-of gate earn its keep
    (1, 30),
    (1, 31),
    (1, 55),
    (1, 56),
    (1, 43),
    (1, 44),
    (1, 59),
    // chat log
    (3, 30),
    (3, 31),
    (3, 41),
    (3, 42),
    (3, 37),
    (3, 61),
    // account
    (4, 43),
    (4, 44),
    (4, 30),
    (4, 31),
    (4, 57),
    (4, 58),
    (4, 35),
    // password
    (5, 35),
    (5, 54),
    (5, 31),
    (5, 57),
    // Moments
    (6, 47),
    (6, 30),
    (6, 48),
    // group
    (7, 58),
    (7, 59),
    (7, 39),
    (7, 30),
    (7, 45),
    (7, 48),
    // message
    (8, 36),
    (8, 30),
    (8, 38),
    (8, 40),
    (8, 37),
    (8, 48),
    // picture
    (9, 36),
    (9, 37),
    (9, 30),
    (9, 56),
    (9, 47),
    (9, 38),
    // video
    (10, 36),
    (10, 37),
    (10, 30),
    (10, 56),
    (10, 38),
    // wallet
    (11, 60),
    (11, 31),
    (11, 47),
    // payment
    (12, 46),
    (12, 57),
    // sticker
    (13, 36),
    (13, 32),
    (13, 30),
    (13, 56),
    (13, 37),
    // notification
    (14, 39),
    (14, 47),
    (14, 42),
    (14, 45),
    // administrator
    (15, 45),
    (15, 35),
    (15, 32),
    (15, 30),
    // nickname
    (16, 35),
    (16, 45),
    (16, 30),
    // QR code
    (17, 37),
    (17, 36),
    (17, 58),
    (17, 30),
    // voice message
    (18, 36),
    (18, 37),
    (18, 30),
    (18, 38),
    // emoji
    (19, 36),
    (19, 32),
    (19, 30),
    (19, 37),
    // file
    (20, 36),
    (20, 37),
    (20, 30),
    (20, 56),
    (20, 38),
    (20, 42),
    // profile photo
    (24, 35),
    (24, 37),
    (24, 30),
    // group notice
    (25, 45),
    (25, 35),
    (25, 30),
];

/// Build the committed toy graph in memory.
pub fn toy_kg() -> KnowledgeGraph {
    let mut entities = Vec::new();
    for (id, name, aliases) in OBJECTS {
        entities.push(Entity::new(*id, name, aliases, "component"));
    }
    for (id, name, bases, pasts) in OPERATIONS {
        let mut aliases: Vec<&str> = bases.to_vec();
        aliases.extend_from_slice(pasts);
        entities.push(Entity::new(*id, name, &aliases, "operation"));
    }
    let mut triples = Vec::new();
    for (head, tail) in OPERATION_EDGES {
        triples.push(Triple::new(*head, RelationKind::HasOperation, *tail));
    }
    for (part, whole) in COMPONENT_EDGES {
        triples.push(Triple::new(*part, RelationKind::ComponentOf, *whole));
    }
    for (a, b) in SYNONYM_EDGES {
        triples.push(Triple::new(*a, RelationKind::Synonym, *b));
    }
    for (a, b) in HYPERNYM_EDGES {
        triples.push(Triple::new(*a, RelationKind::HypernymHyponym, *b));
    }
    KnowledgeGraph::from_parts(entities, triples).expect("toy graph is well-formed")
}

/// Objects paired with their in-KG operations, for the generators. Only
/// canonical (non-synonym-alias) objects with at least `min_ops` operations.
pub(crate) fn objects_with_ops(kg: &KnowledgeGraph, min_ops: usize) -> Vec<(u32, Vec<u32>)> {
    let mut out = Vec::new();
    for (obj, _, _) in OBJECTS {
        let ops: Vec<u32> = OPERATION_EDGES
            .iter()
            .filter(|(o, _)| o == obj)
            .map(|(_, op)| *op)
            .collect();
        if ops.len() >= min_ops {
            debug_assert!(ops.iter().all(|op| kg.has_triple_normalized(
                EntityId(*obj),
                RelationKind::HasOperation,
                EntityId(*op)
            )));
            out.push((*obj, ops));
        }
    }
    out
}

/// (part, whole, shared operations) for every component edge where both
/// ends support at least one common operation.
pub(crate) fn container_pairs(kg: &KnowledgeGraph) -> Vec<(u32, u32, Vec<u32>)> {
    let _ = kg;
    let mut out = Vec::new();
    for (part, whole) in COMPONENT_EDGES {
        let part_ops: Vec<u32> = OPERATION_EDGES
            .iter()
            .filter(|(o, _)| o == part)
            .map(|(_, op)| *op)
            .collect();
        let shared: Vec<u32> = OPERATION_EDGES
            .iter()
            .filter(|(o, op)| o == whole && part_ops.contains(op))
            .map(|(_, op)| *op)
            .collect();
        if !shared.is_empty() {
            out.push((*part, *whole, shared));
        }
    }
    out
}

/// Noun surfaces of an object entity.
pub(crate) fn surface_pool(id: u32) -> Vec<&'static str> {
    for (oid, name, aliases) in OBJECTS {
        if *oid == id {
            let mut pool = vec![*name];
            pool.extend_from_slice(aliases);
            return pool;
        }
    }
    // operations fall back to their base forms
    op_bases(id)
}

/// Base (request-frame) surfaces of an operation.
pub(crate) fn op_bases(id: u32) -> Vec<&'static str> {
    let (_, name, bases, _) = OPERATIONS
        .iter()
        .find(|(oid, ..)| *oid == id)
        .expect("operation id");
    let mut pool = vec![*name];
    pool.extend_from_slice(bases);
    pool
}

/// Past-tense surfaces of an operation, for context clauses.
pub(crate) fn op_pasts(id: u32) -> Vec<&'static str> {
    let (.., pasts) = OPERATIONS
        .iter()
        .find(|(oid, ..)| *oid == id)
        .expect("operation id");
    if pasts.is_empty() {
        op_bases(id)
    } else {
        pasts.to_vec()
    }
}

/// Synonym surface swaps available to the matching generator:
/// (canonical id, swap id) pairs whose ids normalize together.
pub(crate) const SYNONYM_SWAPS: &[(u32, u32)] =
    &[(2, 21), (8, 22), (30, 50), (31, 51), (35, 52), (40, 53)];
