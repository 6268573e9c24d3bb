//! Deterministic synthetic data: a small nested-mention training corpus, a
//! knowledge base with auxiliary tables, and a mini end-to-end corpus linked
//! against it.
//!
//! Sentences are written in a bracket notation where `[TYPE` or `[TYPE-NOM`
//! opens a mention, `]` closes the innermost one, and every other
//! space-separated item is a token.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{
    escape_text, format_submission, Category, Document, EntityType, GoldLink, Language, LinkTarget, Mention,
    MentionKind,
};
use crate::kb::{format_kb, AuxTables, KbEntity};
use crate::neural::seeded_rng;

/// A mention found while reading bracket notation, in character offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedSpan {
    pub char_start: usize,
    pub char_end: usize,
    pub entity_type: EntityType,
    pub kind: MentionKind,
    /// Entity key written after `@` in the opening bracket, if any.
    pub target: Option<String>,
}

/// Reads one bracketed sentence. Tokens are joined with single spaces.
/// Chinese text puts no spaces between tokens. An opening bracket may name
/// its link target: `[GPE@Texas`.
pub fn read_marked(marked: &str, language: Language) -> (String, Vec<MarkedSpan>) {
    let sep = if language == Language::Cmn { "" } else { " " };
    let mut text = String::new();
    let mut len = 0;
    let mut open: Vec<(usize, EntityType, MentionKind, Option<String>)> = Vec::new();
    let mut spans = Vec::new();
    for item in marked.split_whitespace() {
        if let Some(label) = item.strip_prefix('[') {
            let (label, target) = match label.split_once('@') {
                Some((l, t)) => (l, Some(t.to_string())),
                None => (label, None),
            };
            let (ty, kind) = match label.strip_suffix("-NOM") {
                Some(ty) => (ty, MentionKind::Nom),
                None => (label, MentionKind::Nam),
            };
            let ty: EntityType = ty.parse().unwrap_or_else(|_| panic!("bad type in `{marked}`"));
            let start = if len == 0 { 0 } else { len + sep.chars().count() };
            open.push((start, ty, kind, target));
        } else if item == "]" {
            let (start, entity_type, kind, target) = open.pop().unwrap_or_else(|| panic!("unbalanced `{marked}`"));
            spans.push(MarkedSpan {
                char_start: start,
                char_end: len,
                entity_type,
                kind,
                target,
            });
        } else {
            if len > 0 {
                text.push_str(sep);
                len += sep.chars().count();
            }
            text.push_str(item);
            len += item.chars().count();
        }
    }
    assert!(open.is_empty(), "unbalanced `{marked}`");
    (text, spans)
}

/// Joins sentences into one document and turns marked spans into mentions.
/// Span targets are resolved through `resolve`; untargeted spans get a NIL
/// label per distinct lowercased surface and type.
fn assemble(
    doc_id: &str,
    language: Language,
    category: Category,
    sentences: &[(String, Vec<MarkedSpan>)],
    resolve: &dyn Fn(&str) -> String,
    nil_labels: &mut Vec<(String, EntityType)>,
) -> (Document, Vec<GoldLink>) {
    let mut text = String::new();
    let mut offset = 0;
    let mut links = Vec::new();
    for (i, (sentence, spans)) in sentences.iter().enumerate() {
        if i > 0 {
            text.push('\n');
            offset += 1;
        }
        text.push_str(sentence);
        for span in spans {
            let surface: String = sentence
                .chars()
                .skip(span.char_start)
                .take(span.char_end - span.char_start)
                .collect();
            let target = match &span.target {
                Some(key) if !key.starts_with("NIL:") => LinkTarget::KbId(resolve(key)),
                shared => {
                    let key = match shared {
                        Some(label) => (label.clone(), span.entity_type),
                        None => (surface.to_lowercase(), span.entity_type),
                    };
                    let idx = match nil_labels.iter().position(|k| *k == key) {
                        Some(i) => i,
                        None => {
                            nil_labels.push(key);
                            nil_labels.len() - 1
                        }
                    };
                    LinkTarget::NilCluster(format!("NIL{:04}", idx + 1))
                }
            };
            links.push(GoldLink {
                mention: Mention {
                    doc_id: doc_id.to_string(),
                    char_start: offset + span.char_start,
                    char_end: offset + span.char_end,
                    surface,
                    entity_type: span.entity_type,
                    kind: span.kind,
                    confidence: 1.0,
                },
                target,
            });
        }
        offset += sentence.chars().count();
    }
    (
        Document {
            doc_id: doc_id.to_string(),
            text,
            category,
            language,
        },
        links,
    )
}

const MD_TEMPLATES: &[&str] = &[
    "{PER} visited {FAC} on Monday .",
    "{PER} met {PER} in {GPE} .",
    "the {PNOM} of {GPE} spoke at {ORG} .",
    "{ORG} opened a new office near {FAC} .",
    "tourists from {GPE} love {LOC} .",
    "{PER} said the {ONOM} will move to {GPE} .",
    "people in {GPE} watched {PER} at {FAC} .",
    "the {CNOM} of {GPE} praised {ORG} .",
];

fn md_slot(slot: &str, rng: &mut impl Rng) -> String {
    let pick = |xs: &[&str], rng: &mut _| xs.choose(rng).expect("non-empty").to_string();
    match slot {
        "PER" => format!(
            "[PER {} ]",
            pick(
                &[
                    "John Smith",
                    "Mary Jones",
                    "Lincoln",
                    "Kennedy",
                    "Anna Lee",
                    "Tom Baker"
                ],
                rng
            )
        ),
        "GPE" => format!(
            "[GPE {} ]",
            pick(&["Texas", "Boston", "France", "Kentucky", "Paris", "Ohio"], rng)
        ),
        "LOC" => format!(
            "[LOC {} ]",
            pick(&["Mount Everest", "the Nile River", "Lake Erie", "the Alps"], rng)
        ),
        "ORG" => pick(
            &[
                "[ORG University of [GPE Texas ] ]",
                "[ORG [GPE Boston ] Bank ]",
                "[ORG Acme Corp ]",
                "[ORG [GPE Ohio ] State Police ]",
                "[ORG Red Cross ]",
            ],
            rng,
        ),
        "FAC" => pick(
            &[
                "[FAC [PER Lincoln ] Memorial ]",
                "[FAC [PER Kennedy ] Airport ]",
                "[FAC [GPE Boston ] Harbor ]",
                "[FAC [GPE Kentucky ] Fried Chicken ]",
                "[FAC Union Station ]",
            ],
            rng,
        ),
        "PNOM" => format!("[PER-NOM {} ]", pick(&["president", "governor", "mayor"], rng)),
        "ONOM" => format!("[ORG-NOM {} ]", pick(&["company", "agency", "bank"], rng)),
        "CNOM" => format!("[GPE-NOM {} ]", pick(&["city", "state", "country"], rng)),
        other => panic!("unknown slot {other}"),
    }
}

fn fill(template: &str, rng: &mut impl Rng) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(i) = rest.find('{') {
        out.push_str(&rest[..i]);
        let j = rest[i..].find('}').expect("closed slot") + i;
        out.push_str(&md_slot(&rest[i + 1..j], rng));
        rest = &rest[j + 1..];
    }
    out.push_str(rest);
    out
}

/// Fifty English sentences with nested mentions, in ten documents of five
/// sentences. All links are NIL.
pub fn md_corpus(seed: u64) -> (Vec<Document>, Vec<GoldLink>) {
    let mut rng = seeded_rng(seed);
    let mut docs = Vec::new();
    let mut gold = Vec::new();
    let mut nil_labels = Vec::new();
    for d in 0..10 {
        let sentences: Vec<_> = (0..5)
            .map(|s| {
                let template = MD_TEMPLATES[(d * 5 + s) % MD_TEMPLATES.len()];
                read_marked(&fill(template, &mut rng), Language::Eng)
            })
            .collect();
        let (doc, links) = assemble(
            &format!("md_{d:02}"),
            Language::Eng,
            Category::NewsReport,
            &sentences,
            &|key| key.to_string(),
            &mut nil_labels,
        );
        docs.push(doc);
        gold.extend(links);
    }
    (docs, gold)
}

/// Type, canonical name, aliases, redirect titles, disambiguation titles,
/// links count and description of the hand-written KB entries.
type Curated = (
    EntityType,
    &'static str,
    &'static str,
    &'static str,
    &'static str,
    u64,
    &'static str,
);

const CURATED: &[Curated] = &[
    (
        EntityType::Per,
        "Barack Obama",
        "Obama|奥巴马",
        "Barack Hussein Obama",
        "",
        9100,
        "american politician and lawyer who served as president of the united states senator from illinois",
    ),
    (
        EntityType::Per,
        "George W. Bush",
        "Bush|小布什",
        "George Bush",
        "Bush (disambiguation)",
        8200,
        "american politician president of the united states and governor of texas",
    ),
    (
        EntityType::Per,
        "George H. W. Bush",
        "Bush|老布什",
        "George Herbert Walker Bush",
        "Bush (disambiguation)",
        6100,
        "american politician vice president and director of central intelligence",
    ),
    (
        EntityType::Per,
        "Xi Jinping",
        "习近平",
        "",
        "",
        5200,
        "chinese politician general secretary of the communist party",
    ),
    (
        EntityType::Per,
        "Angela Merkel",
        "Merkel|默克尔",
        "",
        "",
        4800,
        "german politician chancellor of germany and physicist",
    ),
    (
        EntityType::Per,
        "Lionel Messi",
        "Messi|梅西",
        "Leo Messi",
        "",
        4500,
        "argentine footballer forward who played for barcelona",
    ),
    (
        EntityType::Per,
        "John F. Kennedy",
        "Kennedy|JFK|肯尼迪",
        "John Fitzgerald Kennedy",
        "Kennedy (disambiguation)",
        7000,
        "american politician president assassinated in dallas",
    ),
    (
        EntityType::Per,
        "George Washington",
        "Washington|华盛顿",
        "",
        "Washington (disambiguation)",
        6600,
        "american general and founding father first president",
    ),
    (
        EntityType::Per,
        "Shakira",
        "夏奇拉",
        "",
        "",
        3900,
        "colombian singer songwriter and dancer",
    ),
    (
        EntityType::Gpe,
        "United States",
        "USA|America|美国|US",
        "United States of America",
        "",
        20000,
        "country in north america federal republic of fifty states",
    ),
    (
        EntityType::Gpe,
        "China",
        "中国|People's Republic of China",
        "",
        "China (disambiguation)",
        15000,
        "country in east asia with beijing as capital",
    ),
    (
        EntityType::Gpe,
        "Mexico",
        "México|墨西哥",
        "",
        "",
        9000,
        "country in north america with mexico city as capital",
    ),
    (
        EntityType::Gpe,
        "Spain",
        "España|西班牙",
        "Kingdom of Spain",
        "",
        9500,
        "country in southern europe with madrid as capital",
    ),
    (
        EntityType::Gpe,
        "France",
        "Francia|法国",
        "",
        "",
        11000,
        "country in western europe with paris as capital",
    ),
    (
        EntityType::Gpe,
        "Germany",
        "Alemania|德国",
        "",
        "",
        10500,
        "country in central europe with berlin as capital",
    ),
    (
        EntityType::Gpe,
        "Japan",
        "Japón|日本",
        "",
        "",
        10000,
        "island country in east asia with tokyo as capital",
    ),
    (
        EntityType::Gpe,
        "Argentina",
        "阿根廷",
        "",
        "",
        7000,
        "country in south america with buenos aires as capital",
    ),
    (
        EntityType::Gpe,
        "Texas",
        "德克萨斯",
        "",
        "",
        6000,
        "state in the southern united states with austin as capital",
    ),
    (
        EntityType::Gpe,
        "South Carolina",
        "南卡罗来纳",
        "",
        "",
        3000,
        "state in the southeastern united states with columbia as capital",
    ),
    (
        EntityType::Gpe,
        "Beijing",
        "北京|Pekín|Peking",
        "",
        "",
        8000,
        "capital city of china in the north china plain",
    ),
    (
        EntityType::Gpe,
        "Shanghai",
        "上海",
        "",
        "",
        7500,
        "largest city of china on the yangtze delta",
    ),
    (
        EntityType::Gpe,
        "Madrid",
        "马德里",
        "",
        "Madrid (disambiguation)",
        6500,
        "capital city of spain on the manzanares river",
    ),
    (
        EntityType::Gpe,
        "Paris",
        "París|巴黎",
        "",
        "Paris (disambiguation)",
        9000,
        "capital city of france on the seine river",
    ),
    (
        EntityType::Gpe,
        "Paris, Texas",
        "Paris",
        "",
        "Paris (disambiguation)",
        300,
        "small city in lamar county in northeast texas",
    ),
    (
        EntityType::Gpe,
        "Geneva",
        "Ginebra|日内瓦",
        "",
        "",
        4000,
        "swiss city on lake geneva hosting international organizations",
    ),
    (
        EntityType::Gpe,
        "New York City",
        "New York|Nueva York|纽约",
        "",
        "",
        12000,
        "most populous city of the united states on the hudson river",
    ),
    (
        EntityType::Gpe,
        "Washington, D.C.",
        "Washington|华盛顿",
        "",
        "Washington (disambiguation)",
        9000,
        "capital city of the united states on the potomac river",
    ),
    (
        EntityType::Gpe,
        "Barcelona",
        "巴塞罗那",
        "",
        "Barcelona (disambiguation)",
        6000,
        "city in catalonia spain on the mediterranean coast",
    ),
    (
        EntityType::Org,
        "United Nations",
        "Naciones Unidas|联合国",
        "",
        "",
        11000,
        "international organization for peace and security headquartered in new york",
    ),
    (
        EntityType::Org,
        "World Health Organization",
        "Organización Mundial de la Salud|世界卫生组织",
        "",
        "",
        5000,
        "agency of the united nations responsible for international public health",
    ),
    (
        EntityType::Org,
        "Red Cross",
        "Cruz Roja|红十字会",
        "International Red Cross",
        "",
        3500,
        "humanitarian movement providing emergency assistance and disaster relief",
    ),
    (
        EntityType::Org,
        "FC Barcelona",
        "Barcelona|Barça|巴塞罗那足球俱乐部",
        "",
        "Barcelona (disambiguation)",
        5500,
        "professional football club based in barcelona catalonia",
    ),
    (
        EntityType::Org,
        "European Union",
        "Unión Europea|欧盟",
        "",
        "",
        8000,
        "political and economic union of member states in europe",
    ),
    (
        EntityType::Org,
        "Real Madrid",
        "皇家马德里",
        "",
        "Madrid (disambiguation)",
        5400,
        "professional football club based in madrid spain",
    ),
    (
        EntityType::Loc,
        "Mount Everest",
        "Everest|珠穆朗玛峰",
        "",
        "",
        4200,
        "highest mountain on earth in the himalayas",
    ),
    (
        EntityType::Loc,
        "Amazon River",
        "Amazon|Río Amazonas|亚马逊河",
        "",
        "Amazon (disambiguation)",
        3800,
        "largest river by discharge flowing through brazil",
    ),
    (
        EntityType::Loc,
        "Yangtze River",
        "Chang Jiang|Río Yangtsé|长江",
        "",
        "",
        3600,
        "longest river in asia flowing through china to shanghai",
    ),
    (
        EntityType::Loc,
        "Pacific Ocean",
        "Pacific|Océano Pacífico|太平洋",
        "",
        "",
        5000,
        "largest and deepest ocean on earth",
    ),
    (
        EntityType::Loc,
        "Alps",
        "Alpes|阿尔卑斯山",
        "",
        "",
        3000,
        "mountain range in central europe",
    ),
    (
        EntityType::Fac,
        "Great Wall",
        "Great Wall of China|Gran Muralla|长城",
        "",
        "",
        4600,
        "ancient fortification across northern china",
    ),
    (
        EntityType::Fac,
        "Kennedy Airport",
        "JFK Airport|John F. Kennedy International Airport|肯尼迪机场",
        "",
        "",
        2900,
        "international airport serving new york city in queens",
    ),
    (
        EntityType::Fac,
        "Lincoln Memorial",
        "林肯纪念堂",
        "",
        "",
        2100,
        "national memorial honoring abraham lincoln on the national mall",
    ),
    (
        EntityType::Fac,
        "Golden Gate Bridge",
        "Puente Golden Gate|金门大桥",
        "",
        "",
        2700,
        "suspension bridge spanning the golden gate strait at san francisco",
    ),
    (
        EntityType::Fac,
        "White House",
        "Casa Blanca|白宫",
        "",
        "",
        6200,
        "official residence of the president of the united states",
    ),
];

const FIRST_NAMES: &[&str] = &[
    "Laura", "Daniel", "Sofia", "Marcus", "Elena", "Victor", "Nadia", "Oscar", "Irene", "Hugo", "Clara", "Felix",
];
const LAST_NAMES: &[&str] = &[
    "Miller",
    "Garcia",
    "Chen",
    "Novak",
    "Okafor",
    "Lindqvist",
    "Moreau",
    "Tanaka",
    "Rossi",
    "Kowalski",
    "Haddad",
    "Silva",
];
const PLACE_PREFIXES: &[&str] = &["Port", "New", "North", "East", "Fort", "West", "San", "Upper"];
const PLACE_ROOTS: &[&str] = &[
    "Alder", "Carver", "Marlow", "Haven", "Ridge", "Vista", "Brook", "Holm", "Crest", "Dale",
];
const OCCUPATIONS: &[&str] = &[
    "politician",
    "singer",
    "footballer",
    "novelist",
    "physicist",
    "actor",
    "painter",
    "lawyer",
    "chef",
    "economist",
];
const TOPICS: &[&str] = &[
    "jazz",
    "chess",
    "poetry",
    "banking",
    "cycling",
    "sculpture",
    "astronomy",
    "film",
    "tennis",
    "opera",
    "medicine",
    "architecture",
    "sailing",
    "robotics",
];
const REGIONS: &[&str] = &[
    "northern", "southern", "coastal", "central", "eastern", "western", "highland", "river",
];
const INDUSTRIES: &[&str] = &[
    "shipping",
    "software",
    "mining",
    "insurance",
    "textiles",
    "publishing",
    "energy",
    "aviation",
];

const TYPE_QUOTAS: &[(EntityType, usize)] = &[
    (EntityType::Per, 70),
    (EntityType::Gpe, 45),
    (EntityType::Org, 35),
    (EntityType::Loc, 20),
    (EntityType::Fac, 30),
];

/// A synthetic KB entry with the entity type the KB itself does not record.
#[derive(Clone, Debug, PartialEq)]
pub struct TypedEntity {
    pub entity_type: EntityType,
    pub entity: KbEntity,
}

fn set(field: &str) -> BTreeSet<String> {
    field.split('|').filter(|s| !s.is_empty()).map(String::from).collect()
}

fn generated_name(ty: EntityType, i: usize) -> (String, Vec<String>) {
    let first = FIRST_NAMES[i % FIRST_NAMES.len()];
    let last = LAST_NAMES[(i * 5 + i / LAST_NAMES.len()) % LAST_NAMES.len()];
    let prefix = PLACE_PREFIXES[i % PLACE_PREFIXES.len()];
    let root = PLACE_ROOTS[(i * 3 + i / PLACE_ROOTS.len()) % PLACE_ROOTS.len()];
    match ty {
        EntityType::Per => (format!("{first} {last}"), vec![last.to_string()]),
        EntityType::Gpe => (format!("{prefix} {root}"), Vec::new()),
        EntityType::Org => {
            let suffix = ["Holdings", "Institute", "Foundation", "Group", "Trust"][i % 5];
            (format!("{last} {suffix}"), Vec::new())
        }
        EntityType::Loc => {
            let suffix = ["Valley", "Bay", "Desert", "Peak"][i % 4];
            (format!("{root} {suffix}"), Vec::new())
        }
        EntityType::Fac => {
            let suffix = ["Stadium", "Tower", "Station", "Library", "Bridge"][i % 5];
            (format!("{root} {suffix}"), Vec::new())
        }
    }
}

fn generated_description(ty: EntityType, rng: &mut impl Rng) -> String {
    let pick = |xs: &[&'static str], rng: &mut dyn rand::RngCore| xs[rng.gen_range(0..xs.len())];
    match ty {
        EntityType::Per => format!(
            "{} from {} {} known for {} and {}",
            pick(OCCUPATIONS, rng),
            pick(PLACE_PREFIXES, rng).to_lowercase(),
            pick(PLACE_ROOTS, rng).to_lowercase(),
            pick(TOPICS, rng),
            pick(TOPICS, rng)
        ),
        EntityType::Gpe => format!(
            "{} town famous for {} and {}",
            pick(REGIONS, rng),
            pick(TOPICS, rng),
            pick(INDUSTRIES, rng)
        ),
        EntityType::Org => format!(
            "company in the {} sector sponsoring {}",
            pick(INDUSTRIES, rng),
            pick(TOPICS, rng)
        ),
        EntityType::Loc => format!("{} landscape popular for {}", pick(REGIONS, rng), pick(TOPICS, rng)),
        EntityType::Fac => format!("{} building hosting {} events", pick(REGIONS, rng), pick(TOPICS, rng)),
    }
}

/// Two hundred KB entries: hand-written multilingual entities plus
/// generated ones, with ids `m.00001`… in generation order.
pub fn typed_kb(seed: u64) -> Vec<TypedEntity> {
    let mut rng = seeded_rng(seed);
    let entry =
        |entity_type, name: String, aliases, redirect_titles, disambiguation_titles, links_count, description| {
            TypedEntity {
                entity_type,
                entity: KbEntity {
                    kb_id: String::new(),
                    canonical_name: name.clone(),
                    aliases,
                    links_count,
                    description,
                    redirect_titles,
                    disambiguation_titles,
                    english_name: Some(name),
                },
            }
        };
    let mut raw: Vec<TypedEntity> = CURATED
        .iter()
        .map(|&(ty, name, aliases, redirects, disamb, links, desc)| {
            entry(
                ty,
                name.to_string(),
                set(aliases),
                set(redirects),
                set(disamb),
                links,
                desc.to_string(),
            )
        })
        .collect();
    for &(ty, quota) in TYPE_QUOTAS {
        let mut i = 0;
        while raw.iter().filter(|r| r.entity_type == ty).count() < quota {
            let (name, aliases) = generated_name(ty, i);
            i += 1;
            if raw.iter().any(|r| r.entity.canonical_name == name) {
                continue;
            }
            let links = rng.gen_range(0..3000);
            let desc = generated_description(ty, &mut rng);
            raw.push(entry(
                ty,
                name,
                aliases.into_iter().collect(),
                BTreeSet::new(),
                BTreeSet::new(),
                links,
                desc,
            ));
        }
    }
    for (i, t) in raw.iter_mut().enumerate() {
        t.entity.kb_id = format!("m.{:05}", i + 1);
        t.entity.aliases.insert(t.entity.canonical_name.clone());
    }
    raw
}

pub fn kb(seed: u64) -> Vec<KbEntity> {
    typed_kb(seed).into_iter().map(|t| t.entity).collect()
}

pub const ABBREVIATIONS: &[(&str, &str)] = &[
    ("SC", "South Carolina"),
    ("TX", "Texas"),
    ("UN", "United Nations"),
    ("ONU", "Naciones Unidas"),
    ("WHO", "World Health Organization"),
    ("OMS", "Organización Mundial de la Salud"),
    ("EU", "European Union"),
    ("UE", "Unión Europea"),
    ("NYC", "New York City"),
    ("EEUU", "Estados Unidos"),
];

pub const ZH_VARIANTS: &[(&str, &str)] = &[
    ("国", "國"),
    ("联", "聯"),
    ("卫", "衛"),
    ("组", "組"),
    ("织", "織"),
    ("红", "紅"),
    ("会", "會"),
    ("马", "馬"),
    ("欧", "歐"),
    ("亚", "亞"),
    ("逊", "遜"),
    ("长", "長"),
    ("门", "門"),
    ("桥", "橋"),
    ("罗", "羅"),
    ("尔", "爾"),
    ("奥", "奧"),
    ("习", "習"),
    ("统", "統"),
    ("总", "總"),
    ("访", "訪"),
    ("问", "問"),
    ("与", "與"),
    ("见", "見"),
    ("举", "舉"),
    ("议", "議"),
    ("专", "專"),
    ("家", "家"),
    ("华", "華"),
    ("纽", "紐"),
    ("约", "約"),
    ("乐", "樂"),
    ("俱", "俱"),
    ("宫", "宮"),
    ("纪", "紀"),
    ("机", "機"),
    ("场", "場"),
    ("萨", "薩"),
    ("来", "來"),
    ("纳", "納"),
    ("内", "內"),
    ("瓦", "瓦"),
];

pub const TRANSLATIONS: &[(&str, &str)] = &[
    ("Estados Unidos", "United States"),
    ("Naciones Unidas", "United Nations"),
    ("Alemania", "Germany"),
    ("España", "Spain"),
    ("Pekín", "Beijing"),
    ("Casa Blanca", "White House"),
    ("Gran Muralla", "Great Wall"),
    ("Cruz Roja", "Red Cross"),
    ("美国", "United States"),
    ("中国", "China"),
    ("北京", "Beijing"),
    ("上海", "Shanghai"),
    ("联合国", "United Nations"),
    ("西班牙", "Spain"),
    ("奥巴马", "Barack Obama"),
    ("习近平", "Xi Jinping"),
    ("梅西", "Lionel Messi"),
    ("长城", "Great Wall"),
    ("日本国", "Japan"),
    ("阿根廷", "Argentina"),
    ("世界卫生组织", "World Health Organization"),
];

pub fn aux_tables() -> AuxTables {
    let tsv = |pairs: &[(&str, &str)]| pairs.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect::<String>();
    AuxTables::parse(&tsv(ABBREVIATIONS), &tsv(ZH_VARIANTS), &tsv(TRANSLATIONS)).expect("built-in tables parse")
}

type MiniDoc = (&'static str, Language, Category, &'static [&'static str]);

/// Mention targets name KB entities by canonical name with `_` for spaces;
/// `NIL:` targets share a NIL cluster.
const MINI_DOCS: &[MiniDoc] = &[
    ("eng_01", Language::Eng, Category::NewsReport, &[
        "[PER@Barack_Obama Barack Obama ] , the [PER-NOM@Barack_Obama president ] of the [GPE@United_States United States ] , arrived in [GPE@Beijing Beijing ] on Monday .",
        "He met [PER@Xi_Jinping Xi Jinping ] to discuss trade with [GPE@China China ] .",
        "[PER@Barack_Obama Obama ] later spoke at the [ORG@United_Nations UN ] office .",
    ]),
    ("eng_02", Language::Eng, Category::NewsReport, &[
        "[PER@George_W._Bush George Bush ] visited [GPE@Texas Texas ] and [GPE@South_Carolina SC ] last week .",
        "[PER@George_W._Bush Bush ] praised the [ORG@Red_Cross Red Cross ] volunteers in [GPE@Paris,_Texas Paris ] .",
        "[PER@NIL:baker Tom Baker ] , a [PER-NOM@NIL:baker farmer ] from [GPE@Texas Texas ] , joined them .",
    ]),
    ("eng_03", Language::Eng, Category::DiscussionForum, &[
        "Has anyone been to the [FAC@Great_Wall Great Wall ] in [GPE@China China ] ?",
        "I climbed [LOC@Mount_Everest Everest ] last year with [ORG@NIL:summit Summit Trekkers ] .",
        "The [ORG-NOM@NIL:summit company ] was great .",
    ]),
    ("eng_04", Language::Eng, Category::NewsReport, &[
        "[ORG@World_Health_Organization WHO ] officials met in [GPE@Geneva Geneva ] .",
        "[GPE@Germany Germany ] and its [PER-NOM@Angela_Merkel chancellor ] [PER@Angela_Merkel Angela Merkel ] sent aid .",
        "[FAC@Kennedy_Airport [PER@John_F._Kennedy Kennedy ] Airport ] in [GPE@New_York_City New York ] was busy .",
    ]),
    ("spa_01", Language::Spa, Category::NewsReport, &[
        "[PER@Barack_Obama Barack Obama ] visitó [GPE@Mexico México ] el lunes .",
        "El [PER-NOM@Barack_Obama presidente ] de [GPE@United_States Estados Unidos ] habló con la [ORG@United_Nations ONU ] .",
    ]),
    ("spa_02", Language::Spa, Category::NewsReport, &[
        "Los turistas de [GPE@Spain España ] visitaron la [FAC@Great_Wall Gran Muralla ] .",
        "[PER@Lionel_Messi Lionel Messi ] nació en [GPE@Argentina Argentina ] .",
        "[PER@Lionel_Messi Messi ] jugó en el [ORG@FC_Barcelona Barcelona ] .",
    ]),
    ("spa_03", Language::Spa, Category::DiscussionForum, &[
        "¿ Alguien conoce a [PER@NIL:ruiz Carmen Ruiz ] ?",
        "Ella vive en [GPE@Madrid Madrid ] cerca del [FAC@NIL:sur Estadio Sur ] .",
    ]),
    ("cmn_01", Language::Cmn, Category::NewsReport, &[
        "[GPE@United_States 美国 ] [PER-NOM@Barack_Obama 总统 ] [PER@Barack_Obama 奥巴马 ] 访问 了 [GPE@Beijing 北京 ] 。",
        "[PER@Barack_Obama 奥巴马 ] 会见 了 [PER@Xi_Jinping 习近平 ] 。",
    ]),
    ("cmn_02", Language::Cmn, Category::NewsReport, &[
        "[ORG@United_Nations 聯合國 ] 在 [GPE@China 中國 ] 舉行 會議 。",
        "[ORG@World_Health_Organization 世界衛生組織 ] 派 專家 去 [GPE@Shanghai 上海 ] 。",
    ]),
    ("cmn_03", Language::Cmn, Category::DiscussionForum, &[
        "[PER@NIL:wang 王小明 ] 在 [FAC@Great_Wall 长城 ] 拍照 。",
        "[GPE@Argentina 阿根廷 ] [PER-NOM@Lionel_Messi 球星 ] [PER@Lionel_Messi 梅西 ] 来到 [GPE@Japan 日本国 ] 。",
    ]),
];

/// The trilingual end-to-end corpus linked against [`kb`].
pub fn mini_corpus(kb: &[KbEntity]) -> (Vec<Document>, Vec<GoldLink>) {
    let resolve = |key: &str| {
        if key.starts_with("NIL:") {
            return key.to_string();
        }
        let name = key.replace('_', " ");
        kb.iter()
            .find(|e| e.canonical_name == name)
            .unwrap_or_else(|| panic!("no KB entity named `{name}`"))
            .kb_id
            .clone()
    };
    let mut docs = Vec::new();
    let mut gold = Vec::new();
    let mut nil_labels = Vec::new();
    for &(doc_id, language, category, lines) in MINI_DOCS {
        let sentences: Vec<_> = lines.iter().map(|l| read_marked(l, language)).collect();
        let (doc, links) = assemble(doc_id, language, category, &sentences, &resolve, &mut nil_labels);
        docs.push(doc);
        gold.extend(links);
    }
    (docs, gold)
}

const NIL_SYLLABLES: &[&str] = &["zor", "qui", "van", "bel", "tra", "mon", "ske", "lio", "dra", "fen"];

fn invented_word(rng: &mut impl Rng) -> String {
    let mut w: String = (0..3).map(|_| *NIL_SYLLABLES.choose(rng).expect("non-empty")).collect();
    w[..1].make_ascii_uppercase();
    w
}

/// One-mention English documents for ranker training and testing. A linked
/// mention is written with one of its entity's Latin-script aliases next to
/// the entity description; a NIL mention pairs a real first name with an
/// invented surname and unrelated context.
pub fn linking_set(seed: u64, kb: &[TypedEntity], size: usize) -> (Vec<Document>, Vec<GoldLink>) {
    let mut rng = seeded_rng(seed);
    let mut docs = Vec::new();
    let mut gold = Vec::new();
    for i in 0..size {
        let doc_id = format!("ls_{seed}_{i:04}");
        let (surface, entity_type, target, context) = if rng.gen_bool(0.2) {
            let first = FIRST_NAMES.choose(&mut rng).expect("non-empty");
            let name = format!("{first} {}", invented_word(&mut rng));
            let context = format!(
                "{} {}",
                invented_word(&mut rng).to_lowercase(),
                TOPICS.choose(&mut rng).expect("non-empty")
            );
            (
                name,
                EntityType::Per,
                LinkTarget::NilCluster(format!("NIL{:04}", i + 1)),
                context,
            )
        } else {
            let t = kb.choose(&mut rng).expect("non-empty KB");
            let latin: Vec<&String> = t
                .entity
                .aliases
                .iter()
                .filter(|a| a.chars().all(|c| c.is_ascii_alphanumeric() || " .,'-".contains(c)))
                .collect();
            let surface = (*latin.choose(&mut rng).expect("canonical name is Latin")).clone();
            (
                surface,
                t.entity_type,
                LinkTarget::KbId(t.entity.kb_id.clone()),
                t.entity.description.clone(),
            )
        };
        let text = format!("{surface} , {context} .");
        docs.push(Document {
            doc_id: doc_id.clone(),
            text,
            category: if rng.gen_bool(0.5) {
                Category::NewsReport
            } else {
                Category::DiscussionForum
            },
            language: Language::Eng,
        });
        gold.push(GoldLink {
            mention: Mention {
                doc_id,
                char_start: 0,
                char_end: surface.chars().count(),
                surface,
                entity_type,
                kind: MentionKind::Nam,
                confidence: 1.0,
            },
            target,
        });
    }
    (docs, gold)
}

/// File names of the bundled data set, relative to its directory.
pub mod files {
    pub const KB: &str = "kb.tsv";
    pub const ABBREVIATIONS: &str = "abbreviations.tsv";
    pub const ZH_VARIANTS: &str = "zh_variants.tsv";
    pub const TRANSLATIONS: &str = "translations.tsv";
    pub const MD_DOCS: &str = "md_train.docs.tsv";
    pub const MD_GOLD: &str = "md_train.gold.tsv";
    pub const MINI_DOCS: &str = "mini.docs.tsv";
    pub const MINI_GOLD: &str = "mini.gold.tsv";
    pub const EL_DOCS: &str = "el_train.docs.tsv";
    pub const EL_GOLD: &str = "el_train.gold.tsv";
}

/// Size of the bundled linking training set.
pub const EL_TRAIN_SIZE: usize = 300;

/// Seed used for the bundled data set.
pub const BUNDLE_SEED: u64 = 7;

/// Every bundled file with its contents.
pub fn bundle() -> Vec<(&'static str, String)> {
    let typed = typed_kb(BUNDLE_SEED);
    let entities: Vec<KbEntity> = typed.iter().map(|t| t.entity.clone()).collect();
    let tsv = |pairs: &[(&str, &str)]| pairs.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect::<String>();
    let docs = |docs: &[Document]| -> String {
        docs.iter()
            .map(|d| {
                format!(
                    "{}\t{}\t{}\t{}\n",
                    d.doc_id,
                    d.category,
                    d.language,
                    escape_text(&d.text)
                )
            })
            .collect()
    };
    let (md_docs, md_gold) = md_corpus(BUNDLE_SEED);
    let (mini_docs, mini_gold) = mini_corpus(&entities);
    let (el_docs, el_gold) = linking_set(BUNDLE_SEED, &typed, EL_TRAIN_SIZE);
    vec![
        (files::KB, format_kb(&entities)),
        (files::ABBREVIATIONS, tsv(ABBREVIATIONS)),
        (files::ZH_VARIANTS, tsv(ZH_VARIANTS)),
        (files::TRANSLATIONS, tsv(TRANSLATIONS)),
        (files::MD_DOCS, docs(&md_docs)),
        (files::MD_GOLD, format_submission(&md_gold, "gold")),
        (files::MINI_DOCS, docs(&mini_docs)),
        (files::MINI_GOLD, format_submission(&mini_gold, "gold")),
        (files::EL_DOCS, docs(&el_docs)),
        (files::EL_GOLD, format_submission(&el_gold, "gold")),
    ]
}

pub fn write_bundle(dir: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::create_dir_all(&dir)?;
    for (name, content) in bundle() {
        std::fs::write(dir.as_ref().join(name), content)?;
    }
    Ok(())
}
