/**
 * Card palette model: one entry per catalog descriptor, grouped and
 * color-coded by card class (action subclasses carry their own colors so
 * cards of the same family look alike at a glance).
 */
import type { DescriptorJson } from "./types.js";

export interface PaletteEntry {
  path: string;
  name: string;
  group: string;
  color: string;
  ends: boolean;
  tokenBadges: { type: string; consumed: boolean }[];
  playable: boolean; // only action cards can be dropped into a hand
}

const GROUP_COLORS: Record<string, string> = {
  "Action/Movement": "#2e8b57",
  "Action/Tech": "#1f6fb2",
  "Action/Think": "#c0392b",
  "Action/Trigger": "#d37f16",
  Input: "#b09a2e",
  Hand: "#7d3fa8",
  Deck: "#5a5a5a",
  Token: "#8a6d3b",
};

export function groupOf(descriptor: DescriptorJson): string {
  return descriptor.class === "Action"
    ? `Action/${descriptor.subclass}`
    : descriptor.class;
}

export function buildPalette(descriptors: DescriptorJson[]): PaletteEntry[] {
  return descriptors
    .map((descriptor) => {
      const group = groupOf(descriptor);
      return {
        path: descriptor.path,
        name: descriptor.path.split("/").pop()!,
        group,
        color: GROUP_COLORS[group] ?? "#444444",
        ends: descriptor.ends,
        tokenBadges: descriptor.tokens.map((t) => ({ type: t.type, consumed: t.consumed })),
        playable: descriptor.class === "Action",
      };
    })
    .sort((a, b) => a.group.localeCompare(b.group) || a.name.localeCompare(b.name));
}

export function paletteGroups(entries: PaletteEntry[]): Map<string, PaletteEntry[]> {
  const groups = new Map<string, PaletteEntry[]>();
  for (const entry of entries) {
    const list = groups.get(entry.group) ?? [];
    list.push(entry);
    groups.set(entry.group, list);
  }
  return groups;
}
