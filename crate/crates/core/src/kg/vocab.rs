//! The fixed 40-relation vocabulary and the name pools used by the
//! synthetic world generator.

use super::{Item, Relation, RelationId, RelationKind};

/// POI types: (relation name, lower-case display noun).
pub const POI_TYPES: [(&str, &str); 30] = [
    ("SubwayStation", "subway station"),
    ("BusStop", "bus stop"),
    ("Park", "park"),
    ("SuperMarket", "supermarket"),
    ("ConvenienceStore", "convenience store"),
    ("FruitShop", "fruit shop"),
    ("PetMarket", "pet market"),
    ("DigitalMall", "digital mall"),
    ("Hospital", "hospital"),
    ("Pharmacy", "pharmacy"),
    ("Bank", "bank"),
    ("PostOffice", "post office"),
    ("Restaurant", "restaurant"),
    ("Cafe", "cafe"),
    ("Bookstore", "bookstore"),
    ("Gym", "gym"),
    ("Hotel", "hotel"),
    ("Cinema", "cinema"),
    ("GasStation", "gas station"),
    ("Library", "library"),
    ("Museum", "museum"),
    ("Bakery", "bakery"),
    ("Hairdresser", "hairdresser"),
    ("Laundry", "laundry"),
    ("PoliceStation", "police station"),
    ("Kindergarten", "kindergarten"),
    ("Stadium", "stadium"),
    ("FoodMarket", "food market"),
    ("ParkingLot", "parking lot"),
    ("TeaHouse", "tea house"),
];

/// Proper-noun suffix appended to a POI name, one per POI type.
const POI_SUFFIX: [&str; 30] = [
    "Subway Station",
    "Bus Stop",
    "Park",
    "Supermarket",
    "Convenience Store",
    "Fruit",
    "Pet Market",
    "Digital Mall",
    "Hospital",
    "Pharmacy",
    "Bank",
    "Post Office",
    "Restaurant",
    "Cafe",
    "Books",
    "Fitness",
    "Hotel",
    "Cinema",
    "Gas Station",
    "Library",
    "Museum",
    "Bakery",
    "Hair Salon",
    "Laundry",
    "Police Station",
    "Kindergarten",
    "Stadium",
    "Food Market",
    "Parking",
    "Tea House",
];

pub const ADJACENCY: (&str, &str) = ("NextTo", "Which place is within 100 meters of {head}?");

/// Attribute relations: (name, template).
pub const ATTRIBUTES: [(&str, &str); 9] = [
    ("LocatedIn", "Where is {head} located?"),
    ("FoundedDate", "When was {head} founded?"),
    ("Founder", "Who founded {head}?"),
    ("Industry", "Which industry does {head} belong to?"),
    ("BuiltYear", "In which year was {head} built?"),
    ("Developer", "Which company developed {head}?"),
    ("Province", "Which province is {head} in?"),
    ("Dialect", "Which dialect is spoken in {head}?"),
    ("PostalCode", "What is the postal code of {head}?"),
];

pub const RELATION_COUNT: usize = POI_TYPES.len() + 1 + ATTRIBUTES.len();

pub fn poi_relation(poi_type: usize) -> RelationId {
    poi_type as RelationId
}

pub fn adjacency_relation() -> RelationId {
    POI_TYPES.len() as RelationId
}

pub fn attribute_relation(name: &str) -> RelationId {
    let idx = ATTRIBUTES
        .iter()
        .position(|(n, _)| *n == name)
        .expect("known attribute relation");
    (POI_TYPES.len() + 1 + idx) as RelationId
}

pub fn poi_suffix(poi_type: usize) -> &'static str {
    POI_SUFFIX[poi_type]
}

pub fn relations() -> Vec<Relation> {
    let mut out = Vec::with_capacity(RELATION_COUNT);
    for (i, (name, noun)) in POI_TYPES.iter().enumerate() {
        out.push(Relation {
            id: i as RelationId,
            name: (*name).to_string(),
            template: format!("Which is the nearest {noun} to {{head}}?"),
            kind: RelationKind::Poi,
            inverse: None,
        });
    }
    let adj = adjacency_relation();
    out.push(Relation {
        id: adj,
        name: ADJACENCY.0.to_string(),
        template: ADJACENCY.1.to_string(),
        kind: RelationKind::Adjacency,
        inverse: Some(adj),
    });
    for (name, template) in ATTRIBUTES {
        out.push(Relation {
            id: out.len() as RelationId,
            name: name.to_string(),
            template: template.to_string(),
            kind: RelationKind::Attribute,
            inverse: None,
        });
    }
    out
}

/// Attribute relations attached to each kind of personal-information entity.
pub fn item_attributes(item: Item) -> &'static [&'static str] {
    match item {
        Item::School => &["LocatedIn", "FoundedDate"],
        Item::Company => &["LocatedIn", "FoundedDate", "Founder", "Industry"],
        Item::Residence => &["LocatedIn", "BuiltYear", "Developer"],
        Item::BirthPlace => &["Province", "Dialect", "PostalCode"],
    }
}

pub const SYLLABLES: [&str; 48] = [
    "Gu", "Lou", "Xin", "Jie", "Kou", "Hua", "Qiao", "Dong", "Xi", "Nan", "Bei", "Zhong", "Shan",
    "Hai", "He", "Hu", "Lin", "Yuan", "Feng", "Yun", "Long", "Tai", "Ping", "An", "Jin", "Yin",
    "Song", "Bai", "Qing", "Hong", "Ming", "Guang", "Chang", "Fu", "Shui", "Tian", "Zhu", "Mei",
    "Lan", "Rui", "Kang", "Le", "Wen", "Hui", "Sheng", "De", "Bao", "Xing",
];

pub const CITIES: [&str; 14] = [
    "Shanghai", "Nanjing", "Hangzhou", "Suzhou", "Wuhan", "Chengdu", "Xi'an", "Tianjin",
    "Chongqing", "Changsha", "Hefei", "Qingdao", "Xiamen", "Kunming",
];

pub const PROVINCES: [&str; 12] = [
    "Jiangsu", "Zhejiang", "Anhui", "Hubei", "Hunan", "Sichuan", "Shaanxi", "Shandong", "Fujian",
    "Yunnan", "Henan", "Guangdong",
];

pub const DIALECTS: [&str; 8] = [
    "Wu", "Mandarin", "Cantonese", "Min", "Hakka", "Xiang", "Gan", "Jin",
];

pub const INDUSTRIES: [&str; 10] = [
    "Finance",
    "Software",
    "Logistics",
    "Retail",
    "Manufacturing",
    "Education",
    "Healthcare",
    "Media",
    "Energy",
    "Construction",
];

pub const SURNAMES: [&str; 16] = [
    "Li", "Wang", "Zhang", "Liu", "Chen", "Yang", "Zhao", "Huang", "Zhou", "Wu", "Xu", "Sun",
    "Ma", "Zhu", "Hu", "Guo",
];

pub fn item_suffix(item: Item) -> &'static [&'static str] {
    match item {
        Item::School => &["University", "Normal University", "Institute of Technology", "College"],
        Item::Company => &["Technology Co.", "Trading Co.", "Holdings", "Logistics Co."],
        Item::Residence => &["Garden", "Residential Community", "Apartments", "Villas"],
        Item::BirthPlace => &["Town", "Village", "County"],
    }
}
