#include "partforge/vlm.hpp"

namespace partforge {

const std::string_view kFilterPrompt = R"PROMPT(You are a visual quality inspector for 3D assets. The images are 
displaying distinct views of a textured mesh. Your task is to 
examine the 3D asset shown in the multi-view rendering and 
determine whether it exhibits any of the following visual flaws 
or characteristics.

Only include tags from the following list. Do not invent or infer 
new tags, even if they seem reasonable. If no tags apply, return 
an empty list. Do not summarize. Return only the matching tags as 
a JSON array.

Here are the tags you may apply (you may select more than one):
### Tag Vocabulary:

- mesh tearing — there is tearing in the mesh, missing polygons, 
  or visible gaps in the geometry that are semantically incorrect 
  (possibly a scanned 3d object)
- 3d scan — mesh geometry appears to be from a 3D scan with 
  irregular, noisy surfaces lacking clean geometric lines, precise 
  edges, or mathematical precision typical of modeled assets
- cutaway view — the mesh appears to be sliced open or missing 
  walls, exposing the interior (e.g. walls of a house removed to 
  show room interiors, section of a ship's hull cut away to 
  display internal compartments, etc). However, natural openings 
  like doorways, windows, or opening that are part of an object's 
  intended design are NOT cutaway view (e.g. the visible interiors 
  of a car from its open windows, the visible cabin of a ships 
  from its doorway, etc.). Those are not cutaway views.
- fragmented object — there is an object composed of two or more 
  disconnected pieces
- multiple objects — the image contains more than one distinct 
  object, not a single unified mesh
- collection of objects — the mesh represents a grouped collection 
  or set of related items (e.g., a toolkit, dinnerware set, or 
  cluster of similar objects)
- mini-scene-like — the mesh is an indoor room or part of an 
  environment, not a standalone object
- room section — the mesh represents architectural elements or 
  room components like wall panels, prefab sections, or modular 
  building parts
- overly complex plants/foliage — the mesh contains intricate 
  plant matter, leaves, branches, or botanical elements with high 
  geometric complexity
- overly thin structures — the mesh contains structures that are 
  extremely thin, wire-like, or have minimal thickness that may 
  cause rendering or processing issues
- no recognizable object — there is no clear or identifiable shape
- heavily occluded views — most of the viewing angles are unable 
  to see semantically meaningful parts of the object (e.g. a 
  stairwell surrounded by walls on three sides)
- zero volume mesh — The object is truly two-dimensional and has 
  **absolutely no measurable thickness** in 3D space. It is a 
  flat surface or an open sheet. Examples: a single polygon card, 
  poster, paper sheet, or an unclosed terrain slice. Exclude all 
  solid objects like swords, knives, rulers, tablet computers, or 
  railroad tracks, which could plausibly exist as a free-standing 
  objects in 3D space. Thin solids (phones, tracks, tablets) are 
  NOT zero volume meshes. Only flat, one-sided polygons qualify.
- has baseplate — the object is situated on top of a base plate 
  (e.g. a thin platform, rocky formation, cutout piece of ground 
  or turf)
- empty image — all views are completely or approximately blank. 
  There is little or no visible content due to rendering failure, 
  bad normalization or missing geometry


### Output format (JSON):
Return a list of all applicable tags.

Return a complexity score for the mesh geometry:
- poor - the asset has very simplistic geometry, with an 
  over-smoothed or blocky characteristic
- moderate - the asset has a normal level of geometric complexity
- high - the asset's geometry is extremely detailed, with high 
  frequency bumps and grooves

Return a complexity score for the texture:
- poor - the asset has a very simplistic texture pattern, uses a 
  very simplistic color pallet, or is generally low resolution
- moderate - the asset has a normal level of textural complexity
- high - the asset's texture is extremely detailed, with high 
  frequency color patterns

Return an overall quality score for the mesh. Prioritize geometric 
complexity and interesting standalone objects over texture quality 
when assigning scores. Take into account the use case when 
assigning a quality score. If an asset's quality is borderline 
between two scores, be conservative and assign the lower score.
- poor — asset is of low quality (3d scan, mesh tearing, not 
  recognizable, fragmented) or asset that is a prefab scene assets 
  (room section, mini-scene-like, multiple distinct objects forming 
  a collection like a car next to another car or two axes - we care 
  about intra part object, not scene level) that should likely be 
  removed from dataset before training. Assets tagged as '3d scan', 
  'multiple objects', 'cutaway view', 'room section', 
  'mini-scene-like', 'overly complex plants/foliage', etc. are of 
  poor quality and should be tagged as 'poor'.
- moderate — asset represents an interesting standalone object, 
  probably good enough for pretraining a large model. Simplistic 
  geometry, simple texture, simplistic design, blocky, low-poly, 
  low-geometric details are still going in the 'moderate', as long 
  as the asset is recognizable and not broken/categorized as 
  'poor'. For instance, a low-poly humanoid character is acceptable 
  and should be tagged as 'moderate'. As rule-of-thumb, no tags 
  are commonly associated with assets scored as 'moderate'.
- excellent — asset has high geometric complexity, represents a 
  high-quality interesting standalone object, and can be used in a 
  small golden training set.

Return a short text description of the textured mesh. This will be 
used for searching the assets, not for training a model. If the 
image is empty or ambiguous, the description can simply be "Empty" 
or "Unknown".

The output should be in json format, specifying the list of "tags", 
the "geometric complexity", the "texture complexity", the 
"reasoning" used to determine the overall quality of the asset, 
the quality "score", and a brief "description" of the asset.

Here is an example output:
{
    "tags": [
        "mesh tearing",
        "heavily occluded views",
        "scene-like",
    ],
    "geometric complexity": "high",
    "texture complexity": "moderate",
    "reasoning": "The asset represents a rocky terrain with dense 
      forest. There are clear gaps in the mesh where there 
      should be terrain, indicating the mesh is incomplete with 
      tears. Many areas of the terrain are not visible from any 
      of the provided views because of the density of the trees. 
      While the asset has very detailed geometry seen in the 
      foliage and rocky portions, and moderately detailed 
      texturing, its scene-like nature and incomplete mesh 
      indicate limited utility for single-object 3D training. 
      Therefore, it deserves a "poor" quality score, and should 
      probably not be included in the training set.
    "score": "poor",
    "description": "An outdoor scene with trees, rocks and dirt.",
})PROMPT";

const std::string_view kClusterPrompt = R"PROMPT(You are an expert in 3D asset analysis, specializing in part 
identification and semantic grouping. You will receive pairs of 
images for a 3D asset. The first image in each pair shows the 
asset with its original textures and overlays with numbers for 
each part and a contour. The second image shows the same view, 
but with numeric overlays on each part and part contours drawn 
in a single color. This second image is designed to help you 
identify and isolate specific parts.

Your task is to group all visible part IDs into high-level 
semantic clusters based on function, assembly, or logical 
relationship.

## Internal Reasoning Guidelines
To create accurate clusters, you must first mentally identify 
each part. Follow these rules in your reasoning:
  - Identify parts with concise, singular, engineering-style 
    names (e.g., "wheel", "upper arm", "rear bumper").
  - Take some perspective: IDs are centered and can represent 
    a whole body / object.
  - Prefer the most specific commonly used term visible.

## Clustering Rules (Final Output)
  - Create logical, high-level groups. Good clusters represent 
    functional systems (e.g., "propulsion", "suspension") or 
    major assemblies (e.g., "front axle", "front lights").
  - Do not cluster parts solely based on visual similarity or 
    proximity; focus on semantic relationships.
  - Do not cluster parts far away that have no logical 
    connection.
  - Cluster names should be descriptive, often plural or 
    collective.
  - Every visible part ID MUST be included in exactly one of 
    the semantic_clusters.
  - **Identity Clustering:** If the individual parts *already* 
    represent the most logical semantic grouping (e.g., each 
    part is a distinct, high-level component like "engine", 
    "gearbox", "chassis"), then returning each part as its own 
    cluster is the correct and preferred output. Do not force 
    illogical merges.
  - Ensure the clusters are holistic and cover all the 
    identified parts.
  - More complex objects with many parts may require more 
    clusters; simpler objects may need fewer.
  - When using position adjectives (e.g., "front", "rear", 
    "left", "right"), ensure they are accurate based on the 
    object perspective shown in the images and not from the 
    viewer's perspective.
  - Be concise in your cluster naming; avoid unnecessary words. 
    If a single word suffices, use it. Avoid using descriptive 
    phrases unless absolutely necessary for clarity. Use 
    adjectives just to distinguish between similar parts like 
    by location (e.g., "left door" vs. "right door"), but do 
    not add extra descriptive terms. Avoid using the whole 3D 
    asset name in the cluster names.

## Output Format
Respond with a single JSON object ONLY. The object must contain 
a single key: "semantic_clusters".

### Example 1: Grouping components
{
  "semantic_clusters": [
    {
      "cluster_name": "wheels",
      "part_ids": [1, 2, 3, 4]
    },
    {
      "cluster_name": "engine",
      "part_ids": [5, 6]
    }
  ]
}

### Example 2: Identity clustering (already well-grouped)
{
  "semantic_clusters": [
    {
      "cluster_name": "front left wheel",
      "part_ids": [1]
    },
    {
      "cluster_name": "front right wheel",
      "part_ids": [2]
    },
    {
      "cluster_name": "engine block",
      "part_ids": [3]
    },
    {
      "cluster_name": "chassis",
      "part_ids": [4]
    }
  ]
})PROMPT";

}  // namespace partforge
